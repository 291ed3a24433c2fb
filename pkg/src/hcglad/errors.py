"""Exception types shared across the package.

Each failure mode the pipeline can hit gets its own class so callers (and
the CLI exit-code mapping) can distinguish config problems from data
problems from numeric ones.
"""


class HcgladError(Exception):
    """Base class for all package-specific errors."""


class ShapeMismatchError(HcgladError):
    """Operands have incompatible shapes for the requested operation."""


class DomainError(HcgladError):
    """An input value is outside the mathematical domain of the operation."""


class EmptyReductionError(HcgladError):
    """A mean/average was requested over zero elements."""


class NonScalarLossError(HcgladError):
    """backward() was called on a tensor that is not 1x1."""


class ManifoldError(HcgladError):
    """A point is off the hyperboloid beyond tolerance."""


class TangentError(HcgladError):
    """A vector is not in the tangent space of its base point."""


class IngestionError(HcgladError):
    """A dataset directory is missing or malformed."""


class ConsistencyError(HcgladError):
    """Dataset files contradict each other (e.g. edge crossing graphs)."""


class DegenerateSplitError(HcgladError):
    """The anomaly class covers every graph; no normal data remains."""


class BatchError(HcgladError):
    """Too few ids to form a contrastive batch."""


class ConfigError(HcgladError):
    """A configuration value is invalid or outside the allowed range."""


class MetricUndefinedError(HcgladError):
    """AUC requested with only one class present."""


class DivergenceError(HcgladError):
    """Training loss became non-finite."""


class CapExceededError(HcgladError):
    """Exhaustive hyperbolicity requested on a graph above the node cap."""
