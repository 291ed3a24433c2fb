"""Lorentz-model hyperbolic geometry at curvature -1.

Two layers of API:

* point/vector classes (:class:`LorentzPoint`, :class:`TangentVector`) with
  exp/log/dist/lift at arbitrary base points: the geometric contract used
  by tests and the invariant fuzz suite;
* row-batched numpy functions plus differentiable ops registered with the
  autodiff engine (``lorentz_exp0`` etc.): the fast path used by the
  encoders, all anchored at the origin.

Manifold points are (d+1)-vectors with <x,x>_L = -1, x0 >= 1. Tangent
vectors at the origin are stored by their spatial part only (the zeroth
coordinate is structurally 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ManifoldError, ShapeMismatchError, TangentError

MANIFOLD_TOL = 1e-8
SMALL_NORM = 1e-9       # switch to first-order limits below this
ACOSH_ARG_MAX = 1e15    # upper clamp keeps arcosh finite for runaway points


def minkowski_inner(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """<x,y>_L = -x0*y0 + sum_i xi*yi along the last axis."""
    return -x[..., 0] * y[..., 0] + (x[..., 1:] * y[..., 1:]).sum(axis=-1)


@dataclass
class LorentzPoint:
    """A point on the hyperboloid; validated on construction."""

    coords: np.ndarray

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64).reshape(-1)
        q = float(minkowski_inner(self.coords, self.coords))
        if abs(q + 1.0) > MANIFOLD_TOL or self.coords[0] <= 0.0:
            raise ManifoldError(f"point off hyperboloid: <x,x>_L={q:.3e}, x0={self.coords[0]:.3e}")

    @property
    def dim(self) -> int:
        return self.coords.size - 1


@dataclass
class TangentVector:
    """A vector in the tangent space of ``base``."""

    coords: np.ndarray
    base: LorentzPoint = field(repr=False)

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64).reshape(-1)
        if self.coords.size != self.base.coords.size:
            raise ShapeMismatchError("tangent vector and base dimension differ")
        q = float(minkowski_inner(self.base.coords, self.coords))
        if abs(q) > MANIFOLD_TOL * max(1.0, float(np.abs(self.coords).max(initial=0.0))):
            raise TangentError(f"<base,v>_L = {q:.3e}, not orthogonal")


def origin(dim: int) -> LorentzPoint:
    c = np.zeros(dim + 1)
    c[0] = 1.0
    return LorentzPoint(c)


def inner(x: LorentzPoint, y: LorentzPoint) -> float:
    if x.coords.size != y.coords.size:
        raise ShapeMismatchError(f"inner: dims {x.coords.size} vs {y.coords.size}")
    return float(minkowski_inner(x.coords, y.coords))


def dist(x: LorentzPoint, y: LorentzPoint) -> float:
    arg = np.clip(-minkowski_inner(x.coords, y.coords), 1.0, ACOSH_ARG_MAX)
    return float(np.arccosh(arg))


def exp_map(x: LorentzPoint, v: TangentVector) -> LorentzPoint:
    """Move from x along tangent v: cosh(|v|) x + sinh(|v|) v/|v|."""
    sq = float(minkowski_inner(v.coords, v.coords))
    if sq < 0.0:
        if sq < -1e-12:
            raise TangentError(f"tangent has negative squared norm {sq:.3e}")
        sq = 0.0
    r = np.sqrt(sq)
    if r < SMALL_NORM:
        return project_to_hyperboloid(x.coords + v.coords)
    c = np.cosh(r) * x.coords + np.sinh(r) * v.coords / r
    return project_to_hyperboloid(c)


def log_map(x: LorentzPoint, y: LorentzPoint) -> TangentVector:
    """Inverse of exp_map; returns the zero vector for coincident points."""
    d = dist(x, y)
    if d < SMALL_NORM:
        return TangentVector(np.zeros_like(x.coords), x)
    w = y.coords + float(minkowski_inner(x.coords, y.coords)) * x.coords
    wn = np.sqrt(max(float(minkowski_inner(w, w)), 0.0))
    if wn < SMALL_NORM:
        return TangentVector(np.zeros_like(x.coords), x)
    return TangentVector(d * w / wn, x)


def lift(x_euclidean: np.ndarray) -> LorentzPoint:
    """exp at the origin of [0, x]: (cosh|x|, sinh|x|*x/|x|)."""
    x = np.asarray(x_euclidean, dtype=np.float64).reshape(-1)
    return LorentzPoint(lift_rows(x.reshape(1, -1))[0])


def project_to_hyperboloid(raw: np.ndarray) -> LorentzPoint:
    """Recompute x0 from the spatial part: x0 = sqrt(1 + |x_s|^2)."""
    raw = np.asarray(raw, dtype=np.float64).reshape(-1)
    out = raw.copy()
    out[0] = np.sqrt(1.0 + (raw[1:] ** 2).sum())
    return LorentzPoint(out)


# ---------------------------------------------------------------------------
# row-batched numpy kernels (shared by the AD rules and the fuzz suite)
# ---------------------------------------------------------------------------

def lift_rows(x: np.ndarray) -> np.ndarray:
    """Lift n x d Euclidean rows to n x (d+1) hyperboloid rows."""
    x = np.asarray(x, dtype=np.float64)
    r = np.linalg.norm(x, axis=1, keepdims=True)
    out = np.empty((x.shape[0], x.shape[1] + 1))
    small = r[:, 0] < SMALL_NORM
    safe_r = np.where(r > 0, r, 1.0)
    out[:, :1] = np.cosh(r)
    out[:, 1:] = np.sinh(r) / safe_r * x
    if small.any():
        out[small, 0] = np.sqrt(1.0 + (x[small] ** 2).sum(axis=1))
        out[small, 1:] = x[small]
    return out


def exp0_rows(u: np.ndarray) -> np.ndarray:
    return lift_rows(u)


def log0_rows(p: np.ndarray) -> np.ndarray:
    """Map n x (d+1) hyperboloid rows to spatial tangent rows at the origin."""
    p = np.asarray(p, dtype=np.float64)
    x0 = np.clip(p[:, :1], 1.0, None)
    psi = _psi(x0)
    return psi * p[:, 1:]


def project_rows_np(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    out = p.copy()
    out[:, 0] = np.sqrt(1.0 + (p[:, 1:] ** 2).sum(axis=1))
    return out


def cdist_rows(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pairwise Lorentz distances between rows of x (n) and y (m)."""
    xj = x.copy()
    xj[:, 0] = -xj[:, 0]
    z = np.clip(-(xj @ y.T), 1.0, ACOSH_ARG_MAX)
    return np.arccosh(z)


def manifold_defect(p: np.ndarray) -> np.ndarray:
    """|<x,x>_L + 1| per row; 0 means exactly on the hyperboloid."""
    p = np.atleast_2d(p)
    return np.abs(-p[:, 0] ** 2 + (p[:, 1:] ** 2).sum(axis=1) + 1.0)


def _psi(x0: np.ndarray) -> np.ndarray:
    """arcosh(x0)/sqrt(x0^2-1), with its x0 -> 1 limit handled by series."""
    e = x0 - 1.0
    small = e < SMALL_NORM
    safe = np.where(small, 2.0, x0)
    psi = np.arccosh(safe) / np.sqrt(safe * safe - 1.0)
    return np.where(small, 1.0 - e / 3.0, psi)


def _psi_prime(x0: np.ndarray) -> np.ndarray:
    e = x0 - 1.0
    small = e < SMALL_NORM
    safe = np.where(small, 2.0, x0)
    s = safe * safe - 1.0
    d = 1.0 / s - safe * np.arccosh(safe) / s ** 1.5
    return np.where(small, -1.0 / 3.0, d)


# ---------------------------------------------------------------------------
# differentiable ops
# ---------------------------------------------------------------------------

def _fw_exp0(u):
    return lift_rows(u)


def _bw_exp0(g, rec, needs):
    if not needs[0]:
        return (None,)
    u = rec.inputs[0].values
    out = rec.output.values
    g0 = g[:, :1]
    gs = g[:, 1:]
    r = np.linalg.norm(u, axis=1, keepdims=True)
    small = (r[:, 0] < SMALL_NORM)[:, None]
    safe_r = np.where(r > 0, r, 1.0)
    sinh_over_r = np.where(small, 1.0, np.sinh(safe_r) / safe_r)
    # d(phi)/dr / r with phi = sinh(r)/r; limit 1/3 at r=0
    phi_prime_over_r = np.where(
        small, 1.0 / 3.0, (safe_r * np.cosh(safe_r) - np.sinh(safe_r)) / safe_r ** 3
    )
    rowdot = (gs * u).sum(axis=1, keepdims=True)
    gu = g0 * sinh_over_r * u + sinh_over_r * gs + phi_prime_over_r * rowdot * u
    if small.any():
        # small branch forward is (sqrt(1+r^2), u)
        sm = small[:, 0]
        gu[sm] = gs[sm] + g0[sm] * u[sm] / out[sm, :1]
    return (gu,)


def _fw_log0(p):
    return log0_rows(p)


def _bw_log0(g, rec, needs):
    if not needs[0]:
        return (None,)
    p = rec.inputs[0].values
    x0 = np.clip(p[:, :1], 1.0, None)
    xs = p[:, 1:]
    gp = np.empty_like(p)
    gp[:, 1:] = _psi(x0) * g
    gp[:, :1] = _psi_prime(x0) * (g * xs).sum(axis=1, keepdims=True)
    return (gp,)


def _fw_project(p):
    return project_rows_np(p)


def _bw_project(g, rec, needs):
    if not needs[0]:
        return (None,)
    out = rec.output.values
    gp = np.zeros_like(out)
    gp[:, 1:] = g[:, 1:] + g[:, :1] * out[:, 1:] / out[:, :1]
    return (gp,)


def _fw_lorentz_cdist(x, y):
    return cdist_rows(x, y)


def _bw_lorentz_cdist(g, rec, needs):
    x, y = (t.values for t in rec.inputs)
    xj = x.copy()
    xj[:, 0] = -xj[:, 0]
    z = -(xj @ y.T)
    # dD/dZ = 1/sqrt(Z^2-1); zero where the forward clamp was active
    live = (z > 1.0) & (z < ACOSH_ARG_MAX)
    gz = np.where(live, g / np.sqrt(np.maximum(z * z - 1.0, 1e-30)), 0.0)
    yj = y.copy()
    yj[:, 0] = -yj[:, 0]
    gx = -(gz @ yj) if needs[0] else None
    gy = -(gz.T @ xj) if needs[1] else None
    return gx, gy


def _fw_euclid_cdist(x, y):
    d2 = ((x[:, None, :] - y[None, :, :]) ** 2).sum(axis=2)
    return np.sqrt(np.maximum(d2, 0.0))


def _bw_euclid_cdist(g, rec, needs):
    x, y = (t.values for t in rec.inputs)
    d = rec.output.values
    w = np.where(d > 0.0, g / np.where(d > 0.0, d, 1.0), 0.0)
    gx = w.sum(axis=1, keepdims=True) * x - w @ y if needs[0] else None
    gy = w.sum(axis=0)[:, None] * y - w.T @ x if needs[1] else None
    return gx, gy


ad.register_op("lorentz_exp0", _fw_exp0, _bw_exp0)
ad.register_op("lorentz_log0", _fw_log0, _bw_log0)
ad.register_op("lorentz_project", _fw_project, _bw_project)
ad.register_op("lorentz_cdist", _fw_lorentz_cdist, _bw_lorentz_cdist)
ad.register_op("euclid_cdist", _fw_euclid_cdist, _bw_euclid_cdist)


def exp0(u: ad.Tensor) -> ad.Tensor:
    """Differentiable origin exp map: n x d tangent -> n x (d+1) points."""
    return ad.apply_op("lorentz_exp0", (u,))


def log0(p: ad.Tensor) -> ad.Tensor:
    """Differentiable origin log map: n x (d+1) points -> n x d tangent."""
    return ad.apply_op("lorentz_log0", (p,))


def project(p: ad.Tensor) -> ad.Tensor:
    """Differentiable hyperboloid projection (recomputes coordinate 0)."""
    return ad.apply_op("lorentz_project", (p,))


def lorentz_cdist(x: ad.Tensor, y: ad.Tensor) -> ad.Tensor:
    """Differentiable pairwise Lorentz distance matrix."""
    if x.shape[1] != y.shape[1]:
        raise ShapeMismatchError(f"cdist: widths {x.shape[1]} vs {y.shape[1]}")
    return ad.apply_op("lorentz_cdist", (x, y))


def euclid_cdist(x: ad.Tensor, y: ad.Tensor) -> ad.Tensor:
    """Euclidean pairwise distances (flat-geometry ablation)."""
    if x.shape[1] != y.shape[1]:
        raise ShapeMismatchError(f"cdist: widths {x.shape[1]} vs {y.shape[1]}")
    return ad.apply_op("euclid_cdist", (x, y))
