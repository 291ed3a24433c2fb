"""Tape-recorded dense-matrix arithmetic with reverse-mode gradients.

Everything is a 2-D float64 matrix; scalars are 1x1. Ops executed inside a
``with Tape():`` block are recorded in execution order, and ``backward``
walks that record in exact reverse order. Outside a tape block ops run
eagerly without recording (useful for inference).

Gradients accumulate (+=) across backward calls; use ``zero_grad`` between
steps. Each backward pass stages adjoints in a scratch map and only adds
the finished adjoint into ``.grad`` at the end, so calling backward twice
exactly doubles every gradient.

Forward and backward rules live in module-level registries keyed by op
name. That keeps the tape replayable and lets tests corrupt a single rule
to prove the gradient checker catches it. New ops (e.g. the Lorentz maps)
are added with :func:`register_op`.

A tape and the tensors recorded on it form one single-writer unit (one
training step, one thread); independent tapes may run concurrently, and
values are safe to share read-only once backward has finished.
"""

from __future__ import annotations

import threading
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    DomainError,
    EmptyReductionError,
    NonScalarLossError,
    ShapeMismatchError,
)

FORWARD_RULES: dict[str, Callable] = {}
BACKWARD_RULES: dict[str, Callable] = {}


def register_op(name: str, forward: Callable, backward: Callable) -> None:
    """Register forward(value..., **ctx) and backward(g, record) rules."""
    FORWARD_RULES[name] = forward
    BACKWARD_RULES[name] = backward


class Tape:
    """Ordered record of the ops executed within one forward pass."""

    def __init__(self) -> None:
        self.records: list[OpRecord] = []

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc) -> bool:
        _tape_stack().pop()
        return False

    def replay(self) -> float:
        """Re-run every recorded forward rule on its stored inputs.

        Returns the max absolute deviation from the recorded outputs
        (0.0 means the replay was bitwise identical).
        """
        worst = 0.0
        for rec in self.records:
            fresh = FORWARD_RULES[rec.name](*(t.values for t in rec.inputs), **rec.ctx)
            d = float(np.max(np.abs(fresh - rec.output.values))) if fresh.size else 0.0
            worst = max(worst, d)
        return worst


_TLS = threading.local()


def _tape_stack() -> list:
    stack = getattr(_TLS, "stack", None)
    if stack is None:
        stack = _TLS.stack = []
    return stack


def active_tape() -> Optional[Tape]:
    stack = _tape_stack()
    return stack[-1] if stack else None


class OpRecord:
    __slots__ = ("name", "inputs", "output", "ctx")

    def __init__(self, name: str, inputs: tuple, output: "Tensor", ctx: dict):
        self.name = name
        self.inputs = inputs
        self.output = output
        self.ctx = ctx


class Tensor:
    """Dense float64 matrix, optionally tracked for gradients.

    ``record`` points at the op that produced this tensor (None for
    leaves), giving backward its parent references.
    """

    __slots__ = ("values", "requires_grad", "_grad", "record", "name", "tape")

    def __init__(self, values, requires_grad: bool = False, name: Optional[str] = None):
        v = np.asarray(values, dtype=np.float64)
        if v.ndim == 0:
            v = v.reshape(1, 1)
        elif v.ndim == 1:
            v = v.reshape(1, -1)
        elif v.ndim != 2:
            raise ShapeMismatchError(f"tensors are 2-D; got ndim={v.ndim}")
        self.values = v
        self.requires_grad = requires_grad
        self._grad: Optional[np.ndarray] = None
        self.record: Optional[OpRecord] = None
        self.tape: Optional[Tape] = None
        self.name = name

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def grad(self) -> np.ndarray:
        if self._grad is None:
            self._grad = np.zeros_like(self.values)
        return self._grad

    @grad.setter
    def grad(self, value) -> None:
        self._grad = np.asarray(value, dtype=np.float64).reshape(self.values.shape)

    def zero_grad(self) -> None:
        if self._grad is not None:
            self._grad[:] = 0.0

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeMismatchError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.values[0, 0])

    def __repr__(self) -> str:
        tag = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    # operator sugar
    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return sub(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def sum(self) -> "Tensor":
        return reduce("sum", self)

    def mean(self) -> "Tensor":
        return reduce("mean", self)

    def rowsum(self) -> "Tensor":
        return reduce("rowsum", self)

    def rowmean(self) -> "Tensor":
        return reduce("rowmean", self)

    def transpose(self) -> "Tensor":
        return transpose(self)

    def backward(self) -> None:
        backward(self)


def constant(values, name: Optional[str] = None) -> Tensor:
    """A tensor that never receives gradients (masks, mixing operators)."""
    return Tensor(values, requires_grad=False, name=name)


def parameter(values, name: Optional[str] = None) -> Tensor:
    return Tensor(values, requires_grad=True, name=name)


def apply_op(name: str, inputs: Sequence[Tensor], ctx: Optional[dict] = None) -> Tensor:
    """Run a registered op, recording it when a tape is active."""
    ctx = ctx or {}
    values = FORWARD_RULES[name](*(t.values for t in inputs), **ctx)
    out = Tensor(values, requires_grad=any(t.requires_grad for t in inputs))
    tape = active_tape()
    if tape is not None:
        rec = OpRecord(name, tuple(inputs), out, ctx)
        out.record = rec
        out.tape = tape
        tape.records.append(rec)
    return out


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(t) into t.grad for every requires_grad ancestor.

    loss must be 1x1 and either recorded on a tape or itself a
    requires_grad leaf. Adjoints are staged separately and added to .grad
    once complete, so repeated calls add repeated full gradients.
    """
    if loss.shape != (1, 1):
        raise NonScalarLossError(f"backward needs a 1x1 scalar, got shape {loss.shape}")
    if loss.record is None:
        if loss.requires_grad:
            loss.grad = loss.grad + 1.0
            return
        raise NonScalarLossError("backward target has no recorded provenance")

    adjoints: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
    holders: dict[int, Tensor] = {id(loss): loss}
    for rec in reversed(loss.tape.records):
        g = adjoints.get(id(rec.output))
        if g is None:
            continue
        needs = tuple(t.requires_grad for t in rec.inputs)
        grads = BACKWARD_RULES[rec.name](g, rec, needs)
        for t, gin in zip(rec.inputs, grads):
            if gin is None or not t.requires_grad:
                continue
            key = id(t)
            if key in adjoints:
                adjoints[key] += gin
            else:
                adjoints[key] = np.array(gin, dtype=np.float64)
                holders[key] = t
    for key, adj in adjoints.items():
        t = holders[key]
        if t.requires_grad:
            t.grad = t.grad + adj


# ---------------------------------------------------------------------------
# primitive rules
# ---------------------------------------------------------------------------

def _fw_matmul(a, b):
    return a @ b


def _bw_matmul(g, rec, needs):
    a, b = (t.values for t in rec.inputs)
    ga = g @ b.T if needs[0] else None
    gb = a.T @ g if needs[1] else None
    return ga, gb


def _fw_add(a, b):
    return a + b


def _bw_add(g, rec, needs):
    return (g if needs[0] else None, g if needs[1] else None)


def _fw_sub(a, b):
    return a - b


def _bw_sub(g, rec, needs):
    return (g if needs[0] else None, -g if needs[1] else None)


def _fw_mul(a, b):
    return a * b


def _bw_mul(g, rec, needs):
    a, b = (t.values for t in rec.inputs)
    return (g * b if needs[0] else None, g * a if needs[1] else None)


def _fw_scale(a, c):
    return a * c


def _bw_scale(g, rec, needs):
    return (g * rec.ctx["c"] if needs[0] else None,)


def _fw_neg(a):
    return -a


def _bw_neg(g, rec, needs):
    return (-g if needs[0] else None,)


def _fw_exp(a):
    return np.exp(a)


def _bw_exp(g, rec, needs):
    return (g * rec.output.values if needs[0] else None,)


def _fw_log(a):
    return np.log(a)


def _bw_log(g, rec, needs):
    return (g / rec.inputs[0].values if needs[0] else None,)


def _fw_relu(a):
    return np.maximum(a, 0.0)


def _bw_relu(g, rec, needs):
    # derivative at exactly 0 defined as 0
    return (g * (rec.inputs[0].values > 0.0) if needs[0] else None,)


def _fw_sum(a):
    return np.array([[a.sum()]])


def _bw_sum(g, rec, needs):
    return (np.full(rec.inputs[0].values.shape, g[0, 0]) if needs[0] else None,)


def _fw_mean(a):
    return np.array([[a.mean()]])


def _bw_mean(g, rec, needs):
    a = rec.inputs[0].values
    return (np.full(a.shape, g[0, 0] / a.size) if needs[0] else None,)


def _fw_rowsum(a):
    return a.sum(axis=1, keepdims=True)


def _bw_rowsum(g, rec, needs):
    a = rec.inputs[0].values
    return (np.broadcast_to(g, a.shape).copy() if needs[0] else None,)


def _fw_rowmean(a):
    return a.mean(axis=1, keepdims=True)


def _bw_rowmean(g, rec, needs):
    a = rec.inputs[0].values
    return (np.broadcast_to(g / a.shape[1], a.shape).copy() if needs[0] else None,)


def _fw_transpose(a):
    return a.T.copy()


def _bw_transpose(g, rec, needs):
    return (g.T.copy() if needs[0] else None,)


def _fw_add_bias(a, b):
    return a + b


def _bw_add_bias(g, rec, needs):
    ga = g if needs[0] else None
    gb = g.sum(axis=0, keepdims=True) if needs[1] else None
    return ga, gb


def _fw_concat_rows(*parts):
    return np.vstack(parts)


def _bw_concat_rows(g, rec, needs):
    out = []
    row = 0
    for t, need in zip(rec.inputs, needs):
        n = t.values.shape[0]
        out.append(g[row:row + n].copy() if need else None)
        row += n
    return tuple(out)


def _fw_slice_rows(a, start, stop):
    return a[start:stop].copy()


def _bw_slice_rows(g, rec, needs):
    if not needs[0]:
        return (None,)
    a = rec.inputs[0].values
    full = np.zeros_like(a)
    full[rec.ctx["start"]:rec.ctx["stop"]] = g
    return (full,)


def _fw_logsumexp_rows(a, mask):
    shifted = np.where(mask, a, -np.inf)
    m = shifted.max(axis=1, keepdims=True)
    return m + np.log(np.exp(shifted - m).sum(axis=1, keepdims=True))


def _bw_logsumexp_rows(g, rec, needs):
    if not needs[0]:
        return (None,)
    a = rec.inputs[0].values
    mask = rec.ctx["mask"]
    w = np.where(mask, np.exp(a - rec.output.values), 0.0)
    return (g * w,)


register_op("matmul", _fw_matmul, _bw_matmul)
register_op("add", _fw_add, _bw_add)
register_op("sub", _fw_sub, _bw_sub)
register_op("mul", _fw_mul, _bw_mul)
register_op("scale", _fw_scale, _bw_scale)
register_op("neg", _fw_neg, _bw_neg)
register_op("exp", _fw_exp, _bw_exp)
register_op("log", _fw_log, _bw_log)
register_op("relu", _fw_relu, _bw_relu)
register_op("sum", _fw_sum, _bw_sum)
register_op("mean", _fw_mean, _bw_mean)
register_op("rowsum", _fw_rowsum, _bw_rowsum)
register_op("rowmean", _fw_rowmean, _bw_rowmean)
register_op("transpose", _fw_transpose, _bw_transpose)
register_op("add_bias", _fw_add_bias, _bw_add_bias)
register_op("concat_rows", _fw_concat_rows, _bw_concat_rows)
register_op("slice_rows", _fw_slice_rows, _bw_slice_rows)
register_op("logsumexp_rows", _fw_logsumexp_rows, _bw_logsumexp_rows)


# ---------------------------------------------------------------------------
# public op functions
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(f"matmul: inner dims differ for {a.shape} x {b.shape}")
    return apply_op("matmul", (a, b))


def _binary(name: str, a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{name}: shapes {a.shape} and {b.shape} differ")
    return apply_op(name, (a, b))


def add(a: Tensor, b: Tensor) -> Tensor:
    return _binary("add", a, b)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return _binary("sub", a, b)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return _binary("mul", a, b)


def scale(a: Tensor, c: float) -> Tensor:
    return apply_op("scale", (a,), {"c": float(c)})


def neg(a: Tensor) -> Tensor:
    return apply_op("neg", (a,))


def exp(a: Tensor) -> Tensor:
    return apply_op("exp", (a,))


def log(a: Tensor) -> Tensor:
    if np.any(a.values <= 0.0):
        raise DomainError("log: non-positive entry")
    return apply_op("log", (a,))


def relu(a: Tensor) -> Tensor:
    return apply_op("relu", (a,))


def transpose(a: Tensor) -> Tensor:
    return apply_op("transpose", (a,))


def add_bias(a: Tensor, b: Tensor) -> Tensor:
    if b.shape != (1, a.shape[1]):
        raise ShapeMismatchError(f"add_bias: bias {b.shape} does not fit {a.shape}")
    return apply_op("add_bias", (a, b))


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    cols = {t.shape[1] for t in parts}
    if len(cols) != 1:
        raise ShapeMismatchError(f"concat_rows: column counts differ: {sorted(cols)}")
    return apply_op("concat_rows", tuple(parts))


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    if not (0 <= start <= stop <= a.shape[0]):
        raise ShapeMismatchError(f"slice_rows: [{start}:{stop}] out of range for {a.shape}")
    return apply_op("slice_rows", (a,), {"start": int(start), "stop": int(stop)})


def logsumexp_rows(a: Tensor, mask: np.ndarray) -> Tensor:
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.shape:
        raise ShapeMismatchError(f"logsumexp_rows: mask {mask.shape} vs {a.shape}")
    if not mask.any(axis=1).all():
        raise EmptyReductionError("logsumexp_rows: a row has no unmasked entries")
    return apply_op("logsumexp_rows", (a,), {"mask": mask})


ELEMENTWISE_OPS = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "scale": scale,
    "exp": exp,
    "log": log,
    "neg": neg,
    "relu": relu,
}

REDUCE_OPS = {"sum", "mean", "rowsum", "rowmean"}


def elementwise(op: str, *args) -> Tensor:
    """Dispatch an elementwise op by name."""
    if op not in ELEMENTWISE_OPS:
        raise KeyError(f"unknown elementwise op {op!r}")
    return ELEMENTWISE_OPS[op](*args)


def reduce(op: str, t: Tensor) -> Tensor:
    """Dispatch a reduction by name."""
    if op not in REDUCE_OPS:
        raise KeyError(f"unknown reduce op {op!r}")
    if t.values.size == 0 and op in ("mean", "rowmean"):
        raise EmptyReductionError(f"{op} over zero elements")
    if op == "rowmean" and t.shape[1] == 0:
        raise EmptyReductionError("rowmean over zero columns")
    return apply_op(op, (t,))
