"""Dense float64 tensors with a reverse-mode differentiation tape.

The tape is define-by-run: opening a ``Tape`` context makes it the active
recording target, every op executed inside appends a backward closure, and
``Tape.backward`` replays the closures in reverse append order. Gradients
always accumulate (never overwrite), so repeated backward calls add up
until ``zero_grad`` is called on the leaves.

Broadcasting is deliberately restricted to scalar-vs-tensor; all other
shape combinations must match exactly. Every op checks its output for
NaN/Inf while finite-checking is enabled (the default; training loops
disable it for speed via ``no_finite_check``).
"""

from __future__ import annotations

import contextlib

import numpy as np

__all__ = [
    "NumericsError",
    "Tape",
    "Tensor",
    "add",
    "add_rowvec",
    "bmm",
    "concat_last",
    "gather_rows",
    "matmul",
    "mul",
    "no_finite_check",
    "outer_last",
    "register_op",
    "reshape",
    "scale",
    "set_check_finite",
    "sigmoid",
    "slice_last",
    "sub",
    "tanh",
    "tmean",
    "tsum",
]


class NumericsError(RuntimeError):
    """Raised when an op produces NaN/Inf or a shape contract is violated."""


_check_finite = True
_active_tape = None


def set_check_finite(enabled: bool) -> None:
    global _check_finite
    _check_finite = bool(enabled)


@contextlib.contextmanager
def no_finite_check():
    global _check_finite
    prev = _check_finite
    _check_finite = False
    try:
        yield
    finally:
        _check_finite = prev


class Tensor:
    """A dense float64 array with an optional gradient accumulator."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # operator sugar; all routed through the module-level ops
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class Tape:
    """Append-only record of backward closures, replayed in reverse."""

    def __init__(self):
        self.nodes = []  # (output tensor, backward closure)

    def __enter__(self):
        global _active_tape
        self._prev = _active_tape
        _active_tape = self
        return self

    def __exit__(self, *exc):
        global _active_tape
        _active_tape = self._prev
        return False

    def backward(self, root: Tensor) -> None:
        """Accumulate d(root)/d(leaf) into every requires_grad leaf."""
        if root.data.size != 1:
            raise NumericsError("backward requires a scalar root")
        _accum(root, np.ones_like(root.data))
        for out, bwd in reversed(self.nodes):
            if out.grad is not None:
                bwd(out.grad)


def _accum(t: Tensor, g: np.ndarray, own: bool = False) -> None:
    """Accumulate g into t.grad.

    own=True lets the first accumulation adopt g as the grad buffer
    without copying. Callers may pass own=True for freshly computed
    arrays, and for pass-through upstream grads as long as no other
    tensor adopts the same buffer in the same closure; later in-place
    additions then write into memory whose only other reader (the
    producing node's backward) has already run.
    """
    if t.grad is None:
        t.grad = g if own else np.array(g, dtype=np.float64)
    else:
        t.grad += g


def register_op(out_data: np.ndarray, inputs, backward, name: str = "op") -> Tensor:
    """Create the output tensor of an op and record it on the active tape.

    ``backward(out_grad)`` must accumulate into the inputs via ``_accum``;
    it is only invoked when some input requires grad.
    """
    if _check_finite and not np.all(np.isfinite(out_data)):
        raise NumericsError(f"non-finite values produced by {name}")
    requires = any(i.requires_grad for i in inputs)
    out = Tensor(out_data, requires_grad=requires)
    if requires and _active_tape is not None:
        _active_tape.nodes.append((out, backward))
    return out


def _binary_shapes(a: Tensor, b: Tensor, name: str):
    if a.data.shape == b.data.shape:
        return
    if a.data.size == 1 or b.data.size == 1:
        return
    raise NumericsError(f"{name}: incompatible shapes {a.data.shape} vs {b.data.shape}")


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Reduce a gradient back to a scalar operand's shape."""
    if g.shape == tuple(shape):
        return g
    return np.sum(g).reshape(shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes(a, b, "add")

    def bwd(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g, a.data.shape), own=True)
        if b.requires_grad:
            _accum(b, _unbroadcast(g, b.data.shape))

    return register_op(a.data + b.data, (a, b), bwd, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes(a, b, "sub")

    def bwd(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g, a.data.shape), own=True)
        if b.requires_grad:
            _accum(b, _unbroadcast(-g, b.data.shape), own=True)

    return register_op(a.data - b.data, (a, b), bwd, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes(a, b, "mul")
    ad, bd = a.data, b.data

    def bwd(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g * bd, ad.shape), own=True)
        if b.requires_grad:
            _accum(b, _unbroadcast(g * ad, bd.shape), own=True)

    return register_op(ad * bd, (a, b), bwd, "mul")


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def bwd(g):
        if a.requires_grad:
            _accum(a, g * c, own=True)

    return register_op(a.data * c, (a,), bwd, "scale")


def sigmoid(a: Tensor) -> Tensor:
    # numerically stable split form
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def bwd(g):
        if a.requires_grad:
            _accum(a, g * out * (1.0 - out), own=True)

    return register_op(out, (a,), bwd, "sigmoid")


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def bwd(g):
        if a.requires_grad:
            _accum(a, g * (1.0 - out * out), own=True)

    return register_op(out, (a,), bwd, "tanh")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise NumericsError(
            f"matmul: incompatible shapes {a.data.shape} vs {b.data.shape}"
        )
    ad, bd = a.data, b.data

    def bwd(g):
        if a.requires_grad:
            _accum(a, g @ bd.T, own=True)
        if b.requires_grad:
            _accum(b, ad.T @ g, own=True)

    return register_op(ad @ bd, (a, b), bwd, "matmul")


def bmm(x: Tensor, w: Tensor) -> Tensor:
    """Per-sample matrix product: x [B,m] times w [B,m,n] -> [B,n]."""
    if x.data.ndim != 2 or w.data.ndim != 3 or x.data.shape != w.data.shape[:2]:
        raise NumericsError(f"bmm: incompatible shapes {x.data.shape} vs {w.data.shape}")
    xd, wd = x.data, w.data

    def bwd(g):
        if x.requires_grad:
            _accum(x, np.einsum("bn,bmn->bm", g, wd), own=True)
        if w.requires_grad:
            _accum(w, np.einsum("bm,bn->bmn", xd, g), own=True)

    return register_op(np.einsum("bm,bmn->bn", xd, wd), (x, w), bwd, "bmm")


def add_rowvec(x: Tensor, v: Tensor) -> Tensor:
    """Add a vector v [n] to every row of x [..,n]."""
    if x.data.shape[-1] != v.data.shape[-1] or v.data.ndim != 1:
        raise NumericsError(
            f"add_rowvec: incompatible shapes {x.data.shape} vs {v.data.shape}"
        )

    def bwd(g):
        if x.requires_grad:
            _accum(x, g, own=True)
        if v.requires_grad:
            _accum(v, g.reshape(-1, g.shape[-1]).sum(axis=0), own=True)

    return register_op(x.data + v.data, (x, v), bwd, "add_rowvec")


def tsum(a: Tensor) -> Tensor:
    shape = a.data.shape

    def bwd(g):
        if a.requires_grad:
            _accum(a, np.full(shape, float(g)), own=True)

    return register_op(np.sum(a.data).reshape(()), (a,), bwd, "tsum")


def tmean(a: Tensor) -> Tensor:
    n = a.data.size
    shape = a.data.shape

    def bwd(g):
        if a.requires_grad:
            _accum(a, np.full(shape, float(g) / n), own=True)

    return register_op(np.mean(a.data).reshape(()), (a,), bwd, "tmean")


def reshape(a: Tensor, shape) -> Tensor:
    old = a.data.shape

    def bwd(g):
        if a.requires_grad:
            _accum(a, g.reshape(old), own=True)

    return register_op(a.data.reshape(shape), (a,), bwd, "reshape")


def slice_last(a: Tensor, start: int, stop: int) -> Tensor:
    """Slice along the last axis; backward adds into the source's grad
    slice in place (no full-size scatter buffer)."""

    def bwd(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            a.grad[..., start:stop] += g

    return register_op(a.data[..., start:stop], (a,), bwd, "slice_last")


def concat_last(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape[:-1] != b.data.shape[:-1]:
        raise NumericsError(
            f"concat_last: incompatible shapes {a.data.shape} vs {b.data.shape}"
        )
    na = a.data.shape[-1]

    def bwd(g):
        if a.requires_grad:
            _accum(a, g[..., :na], own=True)
        if b.requires_grad:
            _accum(b, g[..., na:], own=True)

    return register_op(np.concatenate([a.data, b.data], axis=-1), (a, b), bwd, "concat_last")


def gather_rows(a: Tensor, idx: np.ndarray) -> Tensor:
    """Select rows of a by integer index; backward scatter-adds."""
    idx = np.asarray(idx, dtype=np.intp)

    def bwd(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            np.add.at(full, idx, g)
            _accum(a, full, own=True)

    return register_op(a.data[idx], (a,), bwd, "gather_rows")


def outer_last(a: Tensor, b: Tensor) -> Tensor:
    """Outer product over the last axis: [..,l] x [..,n] -> [..,l*n]."""
    if a.data.shape[:-1] != b.data.shape[:-1]:
        raise NumericsError(
            f"outer_last: incompatible shapes {a.data.shape} vs {b.data.shape}"
        )
    ad, bd = a.data, b.data
    l, n = ad.shape[-1], bd.shape[-1]
    out = np.einsum("...i,...j->...ij", ad, bd).reshape(ad.shape[:-1] + (l * n,))

    def bwd(g):
        gm = g.reshape(ad.shape[:-1] + (l, n))
        if a.requires_grad:
            _accum(a, np.einsum("...ij,...j->...i", gm, bd), own=True)
        if b.requires_grad:
            _accum(b, np.einsum("...ij,...i->...j", gm, ad), own=True)

    return register_op(out, (a, b), bwd, "outer_last")
