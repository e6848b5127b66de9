"""Dense float64 tensors (NCHW convention) and the differentiable op set.

Every operation is a pure function: inputs are never mutated and identical
inputs produce bit-identical outputs. When gradient tracking is enabled and an
input requires grad, the result carries a backward closure; `autodiff.backward`
walks the resulting DAG in reverse topological order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_GRAD_ENABLED = True


class no_grad:
    """Context manager that disables graph construction."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class ShapeError(ValueError):
    """Raised when operand shapes violate an operation's contract."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self.op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.data.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self.op!r})"

    # operator sugar -------------------------------------------------------
    def __add__(self, other):
        return add(self, _coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __neg__(self):
        return neg(self)


def _coerce(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _result(data, parents, op, backward) -> Tensor:
    out = Tensor(data)
    out.op = op
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


@dataclass
class ModalityPair:
    """Matched RGB / IR feature maps."""

    rgb: Tensor
    ir: Tensor

    def __post_init__(self):
        if self.rgb.shape != self.ir.shape:
            raise ShapeError(
                f"modality shapes differ: {self.rgb.shape} vs {self.ir.shape}"
            )

    @property
    def shape(self):
        return self.rgb.shape


# ---------------------------------------------------------------------------
# Elementwise arithmetic
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data

    def backward(g):
        a.accumulate_grad(_unbroadcast(g, a.data.shape))
        b.accumulate_grad(_unbroadcast(g, b.data.shape))

    return _result(data, (a, b), "add", backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    data = a.data - b.data

    def backward(g):
        a.accumulate_grad(_unbroadcast(g, a.data.shape))
        b.accumulate_grad(_unbroadcast(-g, b.data.shape))

    return _result(data, (a, b), "sub", backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data

    def backward(g):
        a.accumulate_grad(_unbroadcast(g * b.data, a.data.shape))
        b.accumulate_grad(_unbroadcast(g * a.data, b.data.shape))

    return _result(data, (a, b), "mul", backward)


def div(a: Tensor, b: Tensor) -> Tensor:
    data = a.data / b.data

    def backward(g):
        a.accumulate_grad(_unbroadcast(g / b.data, a.data.shape))
        b.accumulate_grad(_unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _result(data, (a, b), "div", backward)


def neg(a: Tensor) -> Tensor:
    def backward(g):
        a.accumulate_grad(-g)

    return _result(-a.data, (a,), "neg", backward)


def power(a: Tensor, k: float) -> Tensor:
    data = a.data**k

    def backward(g):
        a.accumulate_grad(g * k * a.data ** (k - 1))

    return _result(data, (a,), "power", backward)


def exp(a: Tensor) -> Tensor:
    data = np.exp(a.data)

    def backward(g):
        a.accumulate_grad(g * data)

    return _result(data, (a,), "exp", backward)


def log(a: Tensor) -> Tensor:
    data = np.log(a.data)

    def backward(g):
        a.accumulate_grad(g / a.data)

    return _result(data, (a,), "log", backward)


def sqrt(a: Tensor) -> Tensor:
    data = np.sqrt(a.data)

    def backward(g):
        a.accumulate_grad(g * 0.5 / data)

    return _result(data, (a,), "sqrt", backward)


def arctan(a: Tensor) -> Tensor:
    data = np.arctan(a.data)

    def backward(g):
        a.accumulate_grad(g / (1.0 + a.data * a.data))

    return _result(data, (a,), "arctan", backward)


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    data = np.clip(a.data, lo, hi)
    mask = (a.data > lo) & (a.data < hi)

    def backward(g):
        a.accumulate_grad(g * mask)

    return _result(data, (a,), "clamp", backward)


def maximum(a: Tensor, b: Tensor) -> Tensor:
    data = np.maximum(a.data, b.data)
    take_a = a.data >= b.data  # ties route to the first argument

    def backward(g):
        a.accumulate_grad(_unbroadcast(g * take_a, a.data.shape))
        b.accumulate_grad(_unbroadcast(g * ~take_a, b.data.shape))

    return _result(data, (a, b), "maximum", backward)


def minimum(a: Tensor, b: Tensor) -> Tensor:
    data = np.minimum(a.data, b.data)
    take_a = a.data <= b.data

    def backward(g):
        a.accumulate_grad(_unbroadcast(g * take_a, a.data.shape))
        b.accumulate_grad(_unbroadcast(g * ~take_a, b.data.shape))

    return _result(data, (a, b), "minimum", backward)


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------


def relu(a: Tensor) -> Tensor:
    data = np.maximum(a.data, 0.0)
    mask = a.data > 0.0

    def backward(g):
        a.accumulate_grad(g * mask)

    return _result(data, (a,), "relu", backward)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: Tensor) -> Tensor:
    data = _sigmoid(a.data)

    def backward(g):
        a.accumulate_grad(g * data * (1.0 - data))

    return _result(data, (a,), "sigmoid", backward)


def silu(a: Tensor) -> Tensor:
    s = _sigmoid(a.data)
    data = a.data * s

    def backward(g):
        a.accumulate_grad(g * s * (1.0 + a.data * (1.0 - s)))

    return _result(data, (a,), "silu", backward)


# ---------------------------------------------------------------------------
# Reductions and reshaping
# ---------------------------------------------------------------------------


def sum_axes(a: Tensor, axes: tuple[int, ...], keepdims: bool = False) -> Tensor:
    data = a.data.sum(axis=axes, keepdims=keepdims)

    def backward(g):
        gg = g if keepdims else np.expand_dims(g, axes)
        a.accumulate_grad(np.broadcast_to(gg, a.data.shape).copy())

    return _result(data, (a,), "sum_axes", backward)


def tsum(a: Tensor) -> Tensor:
    data = np.asarray(a.data.sum())

    def backward(g):
        a.accumulate_grad(np.broadcast_to(g, a.data.shape).copy())

    return _result(data, (a,), "sum", backward)


def tmean(a: Tensor) -> Tensor:
    n = a.data.size
    data = np.asarray(a.data.sum() / n)

    def backward(g):
        a.accumulate_grad(np.broadcast_to(g / n, a.data.shape).copy())

    return _result(data, (a,), "mean", backward)


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)

    def backward(g):
        a.accumulate_grad(g.reshape(a.data.shape))

    return _result(a.data.reshape(shape), (a,), "reshape", backward)


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))

    def backward(g):
        a.accumulate_grad(np.ascontiguousarray(g.transpose(inv)))

    return _result(np.ascontiguousarray(a.data.transpose(axes)), (a,), "transpose", backward)


def concat(xs: list[Tensor], axis: int = 1) -> Tensor:
    data = np.concatenate([x.data for x in xs], axis=axis)
    sizes = [x.data.shape[axis] for x in xs]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for x, lo, hi in zip(xs, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            x.accumulate_grad(g[tuple(idx)])

    return _result(data, tuple(xs), "concat", backward)


def split_channels(x: Tensor, parts) -> list[Tensor]:
    """Split along the channel axis; `parts` is a count or a list of sizes."""
    c = x.data.shape[1]
    if isinstance(parts, int):
        if c % parts != 0:
            raise ShapeError(f"cannot split {c} channels into {parts} equal parts")
        sizes = [c // parts] * parts
    else:
        sizes = list(parts)
        if sum(sizes) != c:
            raise ShapeError(f"split sizes {sizes} do not cover {c} channels")
    outs = []
    lo = 0
    for s in sizes:
        lo_i, hi_i = lo, lo + s

        def make_backward(lo=lo_i, hi=hi_i):
            def backward(g):
                gx = np.zeros_like(x.data)
                gx[:, lo:hi] = g
                x.accumulate_grad(gx)

            return backward

        outs.append(
            _result(x.data[:, lo_i:hi_i].copy(), (x,), "split", make_backward())
        )
        lo = hi_i
    return outs


def select_cell(x: Tensor, n: int, y: int, xx: int) -> Tensor:
    """Extract the channel vector at one spatial cell of an NCHW tensor."""
    data = x.data[n, :, y, xx].copy()

    def backward(g):
        gx = np.zeros_like(x.data)
        gx[n, :, y, xx] = g
        x.accumulate_grad(gx)

    return _result(data, (x,), "select_cell", backward)


def vslice(x: Tensor, lo: int, hi: int) -> Tensor:
    data = x.data[lo:hi].copy()

    def backward(g):
        gx = np.zeros_like(x.data)
        gx[lo:hi] = g
        x.accumulate_grad(gx)

    return _result(data, (x,), "vslice", backward)


# ---------------------------------------------------------------------------
# Matrix multiplication
# ---------------------------------------------------------------------------


def matmul_batched(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 3 or b.data.ndim != 3:
        raise ShapeError("matmul_batched expects rank-3 operands")
    if a.data.shape[0] != b.data.shape[0] or a.data.shape[2] != b.data.shape[1]:
        raise ShapeError(
            f"matmul shapes incompatible: {a.data.shape} x {b.data.shape}"
        )
    data = np.matmul(a.data, b.data)

    def backward(g):
        a.accumulate_grad(np.matmul(g, b.data.transpose(0, 2, 1)))
        b.accumulate_grad(np.matmul(a.data.transpose(0, 2, 1), g))

    return _result(data, (a, b), "matmul_batched", backward)


# ---------------------------------------------------------------------------
# Normalizations, softmax, pooling, shuffle
# ---------------------------------------------------------------------------


def _softmax_axes(x: Tensor, kind: str) -> tuple[int, ...]:
    if kind == "channel":
        if x.data.ndim < 2:
            raise ShapeError("channel softmax needs a channel axis")
        return (1,)
    if kind == "spatial":
        if x.data.ndim == 4:
            return (2, 3)
        return (x.data.ndim - 1,)
    raise ValueError(f"unknown softmax axis {kind!r}")


def softmax(x: Tensor, axis: str) -> Tensor:
    axes = _softmax_axes(x, axis)
    shifted = x.data - x.data.max(axis=axes, keepdims=True)
    ex = np.exp(shifted)
    data = ex / ex.sum(axis=axes, keepdims=True)

    def backward(g):
        dot = (g * data).sum(axis=axes, keepdims=True)
        x.accumulate_grad(data * (g - dot))

    return _result(data, (x,), f"softmax_{axis}", backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalize over the channel axis per spatial position, then affine."""
    if x.data.ndim != 4:
        raise ShapeError("layer_norm expects an NCHW tensor")
    c = x.data.shape[1]
    mu = x.data.mean(axis=1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    gam = gamma.data[None, :, None, None]
    data = gam * xhat + beta.data[None, :, None, None]

    def backward(g):
        gx_hat = g * gam
        m1 = gx_hat.mean(axis=1, keepdims=True)
        m2 = (gx_hat * xhat).mean(axis=1, keepdims=True)
        x.accumulate_grad(inv * (gx_hat - m1 - xhat * m2))
        gamma.accumulate_grad((g * xhat).sum(axis=(0, 2, 3)))
        beta.accumulate_grad(g.sum(axis=(0, 2, 3)))

    return _result(data, (x, gamma, beta), "layer_norm", backward)


def global_pool(x: Tensor, kind: str) -> Tensor:
    if x.data.ndim != 4:
        raise ShapeError("global_pool expects an NCHW tensor")
    n, c, h, w = x.data.shape
    if kind == "average":
        data = x.data.mean(axis=(2, 3), keepdims=True)

        def backward(g):
            x.accumulate_grad(np.broadcast_to(g / (h * w), x.data.shape).copy())

        return _result(data, (x,), "gap", backward)
    if kind == "max":
        flat = x.data.reshape(n, c, h * w)
        idx = flat.argmax(axis=2)  # ties: lowest linear index
        data = np.take_along_axis(flat, idx[:, :, None], axis=2).reshape(n, c, 1, 1)

        def backward(g):
            gx = np.zeros((n, c, h * w))
            np.put_along_axis(gx, idx[:, :, None], g.reshape(n, c, 1), axis=2)
            x.accumulate_grad(gx.reshape(x.data.shape))

        return _result(data, (x,), "gmp", backward)
    raise ValueError(f"unknown pool kind {kind!r}")


def channel_shuffle(x: Tensor, groups: int) -> Tensor:
    """Reshape-transpose channel permutation mixing `groups` blocks."""
    if x.data.ndim != 4:
        raise ShapeError("channel_shuffle expects an NCHW tensor")
    c = x.data.shape[1]
    if groups < 1 or c % groups != 0:
        raise ShapeError(f"channels ({c}) not divisible by groups ({groups})")
    perm = shuffle_permutation(c, groups)
    inv = np.argsort(perm)

    def backward(g):
        x.accumulate_grad(np.ascontiguousarray(g[:, inv]))

    return _result(np.ascontiguousarray(x.data[:, perm]), (x,), "channel_shuffle", backward)


def shuffle_permutation(c: int, groups: int) -> np.ndarray:
    """Source input channel for each output channel of channel_shuffle."""
    out = np.arange(c).reshape(groups, c // groups).T.reshape(-1)
    return out


def avg_pool2(x: Tensor) -> Tensor:
    """2x2 average pooling with stride 2 (dims must be even)."""
    n, c, h, w = x.data.shape
    if h % 2 or w % 2:
        raise ShapeError(f"avg_pool2 needs even spatial dims, got {h}x{w}")
    data = x.data.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))

    def backward(g):
        gx = np.repeat(np.repeat(g, 2, axis=2), 2, axis=3) * 0.25
        x.accumulate_grad(gx)

    return _result(data, (x,), "avg_pool2", backward)
