"""Convolution variants (standard / dilated / depthwise / pointwise /
deformable) and batch normalization, all stride 1 with same-size padding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .tensor import ShapeError, Tensor, _result

_KINDS = ("standard", "dilated", "depthwise", "deformable", "pointwise")


@dataclass(frozen=True)
class ConvSpec:
    kind: str
    in_channels: int
    out_channels: int
    kernel: int = 3
    dilation: int = 1
    has_bias: bool = True

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown conv kind {self.kind!r}")
        if self.kernel % 2 != 1:
            raise ValueError("same-size padding requires an odd kernel")
        if self.kind == "pointwise" and self.kernel != 1:
            raise ValueError("pointwise means kernel 1")
        if self.kind == "depthwise" and self.in_channels != self.out_channels:
            raise ValueError("depthwise requires out channels == in channels")
        if self.kind != "dilated" and self.dilation != 1:
            raise ValueError(f"{self.kind} conv uses dilation 1")
        if self.dilation < 1:
            raise ValueError("dilation must be >= 1")

    @property
    def padding(self) -> int:
        return self.dilation * (self.kernel - 1) // 2


def _check_input(x: Tensor, spec: ConvSpec):
    if x.data.ndim != 4:
        raise ShapeError("conv2d expects an NCHW tensor")
    if x.data.shape[1] != spec.in_channels:
        raise ShapeError(
            f"input has {x.data.shape[1]} channels, spec wants {spec.in_channels}"
        )


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None, spec: ConvSpec) -> Tensor:
    """Cross-correlation with zero padding preserving H and W."""
    _check_input(x, spec)
    depthwise = spec.kind == "depthwise"
    wshape = (
        (spec.out_channels, spec.kernel, spec.kernel)
        if depthwise
        else (spec.out_channels, spec.in_channels, spec.kernel, spec.kernel)
    )
    if weight.data.shape != wshape:
        raise ShapeError(f"weight shape {weight.data.shape}, expected {wshape}")
    b = bias.data if bias is not None else None
    if depthwise:
        y = backend.dwconv2d_fwd(x.data, weight.data, b, spec.dilation)
    else:
        y = backend.conv2d_fwd(x.data, weight.data, b, spec.dilation)

    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        if depthwise:
            gx, gw, gb = backend.dwconv2d_bwd(x.data, weight.data, g, spec.dilation)
        else:
            gx, gw, gb = backend.conv2d_bwd(x.data, weight.data, g, spec.dilation)
        x.accumulate_grad(gx)
        weight.accumulate_grad(gw)
        if bias is not None:
            bias.accumulate_grad(gb)

    return _result(y, parents, f"conv2d_{spec.kind}", backward)


def deformable_conv2d(
    x: Tensor, offsets: Tensor, weight: Tensor, bias: Tensor | None, spec: ConvSpec
) -> Tensor:
    """Deformable convolution v1: per-position fractional tap offsets with
    bilinear sampling; out-of-bounds taps read zero."""
    _check_input(x, spec)
    k = spec.kernel
    if offsets.data.shape != (x.data.shape[0], 2 * k * k, *x.data.shape[2:]):
        raise ShapeError(
            f"offsets shape {offsets.data.shape} does not match 2*k*k={2 * k * k} "
            f"channels over the input grid"
        )
    b = bias.data if bias is not None else None
    y = backend.deform_conv2d_fwd(x.data, offsets.data, weight.data, b, spec.dilation)

    parents = (x, offsets, weight) if bias is None else (x, offsets, weight, bias)

    def backward(g):
        gx, goff, gw, gb = backend.deform_conv2d_bwd(
            x.data, offsets.data, weight.data, g, spec.dilation
        )
        x.accumulate_grad(gx)
        offsets.accumulate_grad(goff)
        weight.accumulate_grad(gw)
        if bias is not None:
            bias.accumulate_grad(gb)

    return _result(y, parents, "deform_conv2d", backward)


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel normalization. Training mode uses (biased) batch statistics
    and updates the running buffers in place; eval mode reads the buffers."""
    if x.data.ndim != 4:
        raise ShapeError("batch_norm expects an NCHW tensor")
    gam = gamma.data[None, :, None, None]
    bet = beta.data[None, :, None, None]
    if training:
        mu = x.data.mean(axis=(0, 2, 3))
        xc = x.data - mu[None, :, None, None]
        var = (xc * xc).mean(axis=(0, 2, 3))
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var
        inv = 1.0 / np.sqrt(var + eps)[None, :, None, None]
        xhat = xc * inv
        data = gam * xhat + bet

        def backward(g):
            gx_hat = g * gam
            m1 = gx_hat.mean(axis=(0, 2, 3), keepdims=True)
            m2 = (gx_hat * xhat).mean(axis=(0, 2, 3), keepdims=True)
            x.accumulate_grad(inv * (gx_hat - m1 - xhat * m2))
            gamma.accumulate_grad((g * xhat).sum(axis=(0, 2, 3)))
            beta.accumulate_grad(g.sum(axis=(0, 2, 3)))

        return _result(data, (x, gamma, beta), "batch_norm_train", backward)

    inv = 1.0 / np.sqrt(running_var + eps)[None, :, None, None]
    xhat = (x.data - running_mean[None, :, None, None]) * inv
    data = gam * xhat + bet

    def backward(g):
        x.accumulate_grad(g * gam * inv)
        gamma.accumulate_grad((g * xhat).sum(axis=(0, 2, 3)))
        beta.accumulate_grad(g.sum(axis=(0, 2, 3)))

    return _result(data, (x, gamma, beta), "batch_norm_eval", backward)
