"""Parameter-owning layer objects on top of the functional op set."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .conv import ConvSpec, batch_norm, conv2d, deformable_conv2d
from .tensor import Tensor


def kaiming_uniform(shape, fan_in: int, rng: np.random.Generator) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Module:
    """Minimal parameter container: Tensors and sub-Modules found on
    attributes (and in list/tuple attributes) are tracked in definition order."""

    def __init__(self):
        self.training = True

    def named_parameters(self, prefix: str = ""):
        for name, value in self.__dict__.items():
            if name == "training":
                continue
            path = f"{prefix}{name}"
            if isinstance(value, Tensor):
                if value.requires_grad:
                    yield path, value
            elif isinstance(value, Module):
                yield from value.named_parameters(path + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{path}.{i}.")
                    elif isinstance(item, Tensor) and item.requires_grad:
                        yield f"{path}.{i}", item

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def modules(self):
        yield self
        for value in self.__dict__.values():
            if isinstance(value, Module):
                yield from value.modules()
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        yield from item.modules()

    def train(self, mode: bool = True):
        for m in self.modules():
            m.training = mode
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Conv2d(Module):
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: int = 1,
        kind: str | None = None,
        dilation: int = 1,
        bias: bool = True,
        *,
        rng: np.random.Generator,
    ):
        super().__init__()
        if kind is None:
            kind = "pointwise" if kernel == 1 else ("dilated" if dilation > 1 else "standard")
        self.spec = ConvSpec(kind, in_channels, out_channels, kernel, dilation, bias)
        if kind == "depthwise":
            fan_in = kernel * kernel
            wshape = (out_channels, kernel, kernel)
        else:
            fan_in = in_channels * kernel * kernel
            wshape = (out_channels, in_channels, kernel, kernel)
        self.weight = Tensor(kaiming_uniform(wshape, fan_in, rng), requires_grad=True)
        self.bias = Tensor(np.zeros(out_channels), requires_grad=True) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias, self.spec)


class DeformConv2d(Module):
    """Deformable conv v1 with an internal 3x3 offset predictor initialized to
    zero so the layer starts out exactly equal to a standard convolution."""

    def __init__(self, in_channels: int, out_channels: int, kernel: int = 3, *, rng):
        super().__init__()
        self.spec = ConvSpec("deformable", in_channels, out_channels, kernel)
        self.offset_conv = Conv2d(in_channels, 2 * kernel * kernel, 3, kind="standard", rng=rng)
        self.offset_conv.weight.data[:] = 0.0
        self.offset_conv.bias.data[:] = 0.0
        fan_in = in_channels * kernel * kernel
        self.weight = Tensor(
            kaiming_uniform((out_channels, in_channels, kernel, kernel), fan_in, rng),
            requires_grad=True,
        )
        self.bias = Tensor(np.zeros(out_channels), requires_grad=True)

    def forward(self, x: Tensor) -> Tensor:
        offsets = self.offset_conv(x)
        return deformable_conv2d(x, offsets, self.weight, self.bias, self.spec)


class BatchNorm2d(Module):
    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.gamma = Tensor(np.ones(channels), requires_grad=True)
        self.beta = Tensor(np.zeros(channels), requires_grad=True)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.momentum = momentum
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return batch_norm(
            x,
            self.gamma,
            self.beta,
            self.running_mean,
            self.running_var,
            self.training,
            self.momentum,
            self.eps,
        )


class LayerNorm(Module):
    """Channel-axis normalization per spatial position."""

    def __init__(self, channels: int, eps: float = 1e-6):
        super().__init__()
        self.gamma = Tensor(np.ones(channels), requires_grad=True)
        self.beta = Tensor(np.zeros(channels), requires_grad=True)
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.gamma, self.beta, self.eps)


_ACTS = {"silu": T.silu, "relu": T.relu, "sigmoid": T.sigmoid, "none": lambda x: x}


class ConvBlock(Module):
    """conv -> BN -> activation, the repeated building block."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: int = 1,
        kind: str | None = None,
        dilation: int = 1,
        act: str = "silu",
        *,
        rng,
    ):
        super().__init__()
        if kind == "deformable":
            self.conv = DeformConv2d(in_channels, out_channels, kernel, rng=rng)
        else:
            self.conv = Conv2d(
                in_channels, out_channels, kernel, kind=kind, dilation=dilation,
                bias=False, rng=rng,
            )
        self.bn = BatchNorm2d(out_channels)
        self.act = act

    def forward(self, x: Tensor) -> Tensor:
        return _ACTS[self.act](self.bn(self.conv(x)))
