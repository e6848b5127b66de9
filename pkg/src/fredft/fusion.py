"""The fusion stack: local enhancement (LFEM), cross-modal global modeling
(CGMM), frequency-domain attention (MFDA) with its spatial-attention ablation
(MSDA), the mixed-scale frequency feed-forward (FDFFL) with its MLP ablation,
and the aggregation module (FDFAM) composing them into the full fused block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .fft import concat_spectrum, fft2d, ifft2d, spectrum_mul, split_spectrum, take_real
from .layers import Conv2d, ConvBlock, LayerNorm, Module
from .tensor import ModalityPair, Tensor

_MODES = ("rgb", "ir")


@dataclass
class FreDFTConfig:
    channels: int = 32
    height: int = 8
    width: int = 8
    conjugate_key: bool = False
    cross_qk: bool = False
    dilation: int = 2
    deformable: bool = True
    attention: str = "mfda"  # or "msda"
    ffl: str = "fdffl"  # or "mlp"
    use_lfem: bool = True
    use_cgmm: bool = True

    def __post_init__(self):
        if self.channels < 1:
            raise ValueError("channels must be positive")
        if self.attention not in ("mfda", "msda"):
            raise ValueError(f"unknown attention {self.attention!r}")
        if self.ffl not in ("fdffl", "mlp"):
            raise ValueError(f"unknown feed-forward {self.ffl!r}")

    @property
    def expanded_channels(self) -> int:
        """FDFFL branch width: smallest multiple of 3 that is >= channels."""
        return 3 * math.ceil(self.channels / 3)


class LFEM(Module):
    """Four-branch local enhancement with channel shuffle and residual."""

    def __init__(self, cfg: FreDFTConfig, *, rng):
        super().__init__()
        c = cfg.channels
        self.pre = ConvBlock(c, c, 1, rng=rng)
        self.branch_std = ConvBlock(c, c, 3, rng=rng)
        self.branch_dil = ConvBlock(c, c, 3, dilation=cfg.dilation, rng=rng)
        def_kind = "deformable" if cfg.deformable else "standard"
        self.branch_def = ConvBlock(c, c, 3, kind=def_kind, rng=rng)
        self.branch_dw = ConvBlock(c, c, 3, kind="depthwise", rng=rng)
        self.proj = Conv2d(4 * c, c, 1, rng=rng)

    def forward(self, x: Tensor) -> Tensor:
        t = self.pre(x)
        branches = [
            self.branch_std(t),
            self.branch_dil(t),
            self.branch_def(t),
            self.branch_dw(t),
        ]
        mixed = T.channel_shuffle(T.concat(branches, axis=1), groups=4)
        return x + self.proj(mixed)


class CGMM(Module):
    """Cross-modal global modeling: pooled-channel softmax attention plus a
    spatially-softmaxed channel gate exchanged between modalities."""

    def __init__(self, cfg: FreDFTConfig, *, rng):
        super().__init__()
        c = cfg.channels
        for m in _MODES:
            setattr(self, f"b3_{m}", ConvBlock(c, c, 1, rng=rng))
            setattr(self, f"b4_{m}", ConvBlock(c, c, 1, rng=rng))
            setattr(self, f"p_conv_{m}", Conv2d(2, c, 1, rng=rng))
            setattr(self, f"g_conv_{m}", Conv2d(c, c, 1, rng=rng))
            setattr(self, f"g_ln_{m}", LayerNorm(c))

    def _branches(self, x: Tensor, m: str):
        return {
            "b1": T.global_pool(x, "average"),
            "b2": T.global_pool(x, "max"),
            "b3": getattr(self, f"b3_{m}")(x),
            "b4": getattr(self, f"b4_{m}")(x),
        }

    def _enhance(self, x: Tensor, own, partner, m: str) -> Tensor:
        n, c, h, w = x.shape
        s1 = T.softmax(partner["b1"], "channel")
        s2 = T.softmax(partner["b2"], "channel")
        s3 = T.softmax(partner["b3"], "spatial")
        tokens = T.transpose(T.reshape(own["b4"], (n, c, h * w)), (0, 2, 1))
        m1 = T.reshape(
            T.matmul_batched(tokens, T.reshape(s1, (n, c, 1))), (n, 1, h, w)
        )
        m2 = T.reshape(
            T.matmul_batched(tokens, T.reshape(s2, (n, c, 1))), (n, 1, h, w)
        )
        m3 = T.sum_axes(T.mul(own["b4"], s3), (2, 3), keepdims=True)
        p = getattr(self, f"p_conv_{m}")(T.concat([m1, m2], axis=1))
        gate = T.sigmoid(getattr(self, f"g_ln_{m}")(getattr(self, f"g_conv_{m}")(m3)))
        return x + T.mul(p, gate)

    def forward(self, pair: ModalityPair) -> ModalityPair:
        br_rgb = self._branches(pair.rgb, "rgb")
        br_ir = self._branches(pair.ir, "ir")
        return ModalityPair(
            rgb=self._enhance(pair.rgb, br_rgb, br_ir, "rgb"),
            ir=self._enhance(pair.ir, br_ir, br_rgb, "ir"),
        )


class _QKVMaker(Module):
    """LN -> 1x1 conv to 3C -> 3x3 depthwise, split into Q, K, V."""

    def __init__(self, channels: int, *, rng):
        super().__init__()
        self.ln = LayerNorm(channels)
        self.point = Conv2d(channels, 3 * channels, 1, rng=rng)
        self.dw = Conv2d(3 * channels, 3 * channels, 3, kind="depthwise", rng=rng)

    def forward(self, x: Tensor):
        q, k, v = T.split_channels(self.dw(self.point(self.ln(x))), 3)
        return q, k, v


class MFDA(Module):
    """Frequency-domain attention: Q/K spectra are multiplied elementwise,
    inverted back to a (numerically real) spatial map, normalized, and used to
    gate the other modality's V."""

    IMAG_TOL = 1e-6

    def __init__(self, cfg: FreDFTConfig, *, rng):
        super().__init__()
        self.conjugate_key = cfg.conjugate_key
        self.cross_qk = cfg.cross_qk
        c = cfg.channels
        for m in _MODES:
            setattr(self, f"qkv_{m}", _QKVMaker(c, rng=rng))
            setattr(self, f"post_ln_{m}", LayerNorm(c))
            setattr(self, f"out_{m}", Conv2d(c, c, 1, rng=rng))

    def forward(self, pair: ModalityPair) -> ModalityPair:
        qkv = {m: getattr(self, f"qkv_{m}")(getattr(pair, m)) for m in _MODES}
        outs = {}
        for m, other in (("rgb", "ir"), ("ir", "rgb")):
            q = qkv[m][0]
            k = qkv[other][1] if self.cross_qk else qkv[m][1]
            v_other = qkv[other][2]
            prod = spectrum_mul(fft2d(q), fft2d(k), conjugate_b=self.conjugate_key)
            sp = take_real(ifft2d(prod), imag_tol=self.IMAG_TOL)
            gated = T.mul(getattr(self, f"post_ln_{m}")(sp), v_other)
            outs[m] = getattr(pair, m) + getattr(self, f"out_{m}")(gated)
        return ModalityPair(rgb=outs["rgb"], ir=outs["ir"])


class MSDA(Module):
    """Spatial-domain dot-product cross-attention ablation baseline."""

    # above this token count the no-grad path streams the attention matrix in
    # row blocks to bound memory; results are identical to the full matrix
    BLOCK_TOKENS = 4096

    def __init__(self, cfg: FreDFTConfig, *, rng):
        super().__init__()
        c = cfg.channels
        for m in _MODES:
            setattr(self, f"qkv_{m}", _QKVMaker(c, rng=rng))
            setattr(self, f"out_{m}", Conv2d(c, c, 1, rng=rng))

    def _attend_blocked(self, q, k, v, scale):
        n, hw, c = q.shape
        out = np.empty((n, hw, c))
        for lo in range(0, hw, self.BLOCK_TOKENS):
            hi = min(lo + self.BLOCK_TOKENS, hw)
            scores = np.matmul(q[:, lo:hi], np.swapaxes(k, 1, 2)) * scale
            scores -= scores.max(axis=2, keepdims=True)
            np.exp(scores, out=scores)
            scores /= scores.sum(axis=2, keepdims=True)
            out[:, lo:hi] = np.matmul(scores, v)
        return out

    def forward(self, pair: ModalityPair) -> ModalityPair:
        n, c, h, w = pair.shape
        hw = h * w
        scale = 1.0 / np.sqrt(c)
        qkv = {m: getattr(self, f"qkv_{m}")(getattr(pair, m)) for m in _MODES}
        flat = {
            m: tuple(
                T.transpose(T.reshape(t, (n, c, hw)), (0, 2, 1)) for t in qkv[m]
            )
            for m in _MODES
        }
        outs = {}
        for m, other in (("rgb", "ir"), ("ir", "rgb")):
            q, k, _ = flat[m]
            v_other = flat[other][2]
            if not T.grad_enabled() and hw > self.BLOCK_TOKENS:
                mixed = Tensor(
                    self._attend_blocked(q.data, k.data, v_other.data, scale)
                )
            else:
                scores = T.mul(
                    T.matmul_batched(q, T.transpose(k, (0, 2, 1))), Tensor(scale)
                )
                attn = T.softmax(scores, "spatial")
                mixed = T.matmul_batched(attn, v_other)
            spatial = T.reshape(T.transpose(mixed, (0, 2, 1)), (n, c, h, w))
            outs[m] = getattr(pair, m) + getattr(self, f"out_{m}")(spatial)
        return ModalityPair(rgb=outs["rgb"], ir=outs["ir"])


class FDFFL(Module):
    """Mixed-scale frequency feed-forward: three kernel-size branches are
    transformed to the frequency domain, split into channel chunks, and the
    chunks are re-mixed across branches before inversion."""

    KERNELS = (3, 5, 7)

    def __init__(self, cfg: FreDFTConfig, *, rng):
        super().__init__()
        c = cfg.channels
        ce = cfg.expanded_channels
        self.expanded = ce
        self.ln = LayerNorm(c)
        self.enter = [Conv2d(c, ce, 1, rng=rng) for _ in self.KERNELS]
        self.branch_dw = [
            Conv2d(ce, ce, k, kind="depthwise", rng=rng) for k in self.KERNELS
        ]
        self.mix_dw = [
            Conv2d(ce, ce, k, kind="depthwise", rng=rng) for k in self.KERNELS
        ]
        self.proj = Conv2d(3 * ce, c, 1, rng=rng)

    def chunk_routing(self):
        """(path, branch, chunk, channel lo, channel hi) for every consumed
        chunk; path j takes chunk j of every branch."""
        step = self.expanded // 3
        return [
            (p, b, p, p * step, (p + 1) * step)
            for p in range(3)
            for b in range(3)
        ]

    def forward(self, x: Tensor) -> Tensor:
        xl = self.ln(x)
        chunks = []
        for enter, dw in zip(self.enter, self.branch_dw):
            spec = fft2d(T.relu(dw(enter(xl))))
            chunks.append(split_spectrum(spec, 3))
        paths = []
        for path_idx, mix in enumerate(self.mix_dw):
            merged = concat_spectrum([chunks[b][path_idx] for b in range(3)])
            spatial = take_real(ifft2d(merged))
            paths.append(T.relu(mix(spatial)))
        return x + self.proj(T.concat(paths, axis=1))


class MLPFFL(Module):
    """Plain MLP feed-forward ablation baseline: LN -> 1x1 (4x) -> ReLU -> 1x1."""

    def __init__(self, cfg: FreDFTConfig, *, rng):
        super().__init__()
        c = cfg.channels
        self.ln = LayerNorm(c)
        self.fc1 = Conv2d(c, 4 * c, 1, rng=rng)
        self.fc2 = Conv2d(4 * c, c, 1, rng=rng)

    def forward(self, x: Tensor) -> Tensor:
        return x + self.fc2(T.relu(self.fc1(self.ln(x))))


def _make_attention(cfg: FreDFTConfig, rng) -> Module:
    return MFDA(cfg, rng=rng) if cfg.attention == "mfda" else MSDA(cfg, rng=rng)


def _make_ffl(cfg: FreDFTConfig, rng) -> Module:
    return FDFFL(cfg, rng=rng) if cfg.ffl == "fdffl" else MLPFFL(cfg, rng=rng)


class FDFAM(Module):
    """Attention + per-modality feed-forward + concat-project fusion."""

    def __init__(self, cfg: FreDFTConfig, *, rng):
        super().__init__()
        c = cfg.channels
        self.attention = _make_attention(cfg, rng)
        self.ffl_rgb = _make_ffl(cfg, rng)
        self.ffl_ir = _make_ffl(cfg, rng)
        self.fuse = Conv2d(2 * c, c, 1, rng=rng)

    def forward(self, pair: ModalityPair, return_attended: bool = False):
        attended = self.attention(pair)
        x_rgb = self.ffl_rgb(attended.rgb)
        x_ir = self.ffl_ir(attended.ir)
        fused = T.relu(self.fuse(T.concat([x_rgb, x_ir], axis=1)))
        return (fused, attended) if return_attended else fused


class FreDFTBlock(Module):
    """Per-modality LFEM, joint CGMM, then FDFAM producing the fused map."""

    def __init__(self, cfg: FreDFTConfig, *, rng):
        super().__init__()
        self.cfg = cfg
        if cfg.use_lfem:
            self.lfem_rgb = LFEM(cfg, rng=rng)
            self.lfem_ir = LFEM(cfg, rng=rng)
        if cfg.use_cgmm:
            self.cgmm = CGMM(cfg, rng=rng)
        self.fdfam = FDFAM(cfg, rng=rng)

    def forward(self, pair: ModalityPair, return_stages: bool = False):
        stages = {}
        if self.cfg.use_lfem:
            pair = ModalityPair(rgb=self.lfem_rgb(pair.rgb), ir=self.lfem_ir(pair.ir))
        stages["lfem"] = pair
        if self.cfg.use_cgmm:
            pair = self.cgmm(pair)
        stages["cgmm"] = pair
        fused, attended = self.fdfam(pair, return_attended=True)
        stages["mfda"] = attended
        stages["fused"] = fused
        if return_stages:
            return fused, stages
        return fused
