"""2D discrete Fourier transforms over the spatial axes of NCHW tensors.

Convention: unnormalized forward transform, 1/(H*W) on the inverse, so the
frequency-domain elementwise product inverts to the plain circular convolution
of the spatial inputs. Arbitrary side lengths are supported (radix-2 core,
Bluestein chirp-z for the rest).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .tensor import ShapeError, Tensor, _result, mul, sub, add


class ImaginaryResidueError(ValueError):
    """Inverse-transform output had a larger imaginary part than allowed."""

    def __init__(self, max_imag: float, tol: float):
        self.max_imag = max_imag
        self.tol = tol
        super().__init__(
            f"imaginary residue {max_imag:.3e} exceeds tolerance {tol:.3e}"
        )


@dataclass
class ComplexTensor:
    """Paired real/imaginary tensors of identical shape."""

    re: Tensor
    im: Tensor

    def __post_init__(self):
        if self.re.shape != self.im.shape:
            raise ShapeError(
                f"re/im shapes differ: {self.re.shape} vs {self.im.shape}"
            )

    @property
    def shape(self):
        return self.re.shape

    @property
    def grid(self) -> tuple[int, int]:
        """Spatial (H, W) of the originating grid."""
        return self.re.shape[-2], self.re.shape[-1]

    def to_complex(self) -> np.ndarray:
        return self.re.data + 1j * self.im.data


# A spectrum is just a complex tensor whose trailing axes are frequency bins.
SpectrumTensor = ComplexTensor


def fft2d(x: Tensor) -> ComplexTensor:
    """Unnormalized forward 2D DFT of a real NCHW tensor."""
    if x.data.ndim != 4:
        raise ShapeError("fft2d expects an NCHW tensor")
    spec = backend.dft2(x.data.astype(np.complex128))

    def backward_re(g):
        x.accumulate_grad(backend.dft2(g.astype(np.complex128)).real.copy())

    def backward_im(g):
        x.accumulate_grad(backend.dft2(g.astype(np.complex128)).imag.copy())

    re = _result(spec.real.copy(), (x,), "fft2d_re", backward_re)
    im = _result(spec.imag.copy(), (x,), "fft2d_im", backward_im)
    return ComplexTensor(re, im)


def ifft2d(s: ComplexTensor) -> ComplexTensor:
    """Inverse 2D DFT with 1/(H*W) scaling."""
    h, w = s.grid
    scale = 1.0 / (h * w)
    out = backend.idft2(s.to_complex())
    sre, sim = s.re, s.im

    def backward_re(g):
        f = backend.dft2(g.astype(np.complex128))
        sre.accumulate_grad(scale * f.real)
        sim.accumulate_grad(scale * f.imag)

    def backward_im(g):
        f = backend.dft2(g.astype(np.complex128))
        sre.accumulate_grad(-scale * f.imag)
        sim.accumulate_grad(scale * f.real)

    re = _result(out.real.copy(), (sre, sim), "ifft2d_re", backward_re)
    im = _result(out.imag.copy(), (sre, sim), "ifft2d_im", backward_im)
    return ComplexTensor(re, im)


def take_real(c: ComplexTensor, imag_tol: float | None = None) -> Tensor:
    """Real part of a complex tensor, optionally asserting the imaginary
    residue stays below `imag_tol`."""
    if imag_tol is not None:
        max_imag = float(np.abs(c.im.data).max()) if c.im.data.size else 0.0
        if max_imag > imag_tol:
            raise ImaginaryResidueError(max_imag, imag_tol)
    return c.re


def spectrum_mul(a: ComplexTensor, b: ComplexTensor, conjugate_b: bool = False) -> ComplexTensor:
    """Elementwise complex product of two spectra (optionally conj(b))."""
    if a.shape != b.shape:
        raise ShapeError(f"spectrum shapes differ: {a.shape} vs {b.shape}")
    if conjugate_b:
        re = add(mul(a.re, b.re), mul(a.im, b.im))
        im = sub(mul(a.im, b.re), mul(a.re, b.im))
    else:
        re = sub(mul(a.re, b.re), mul(a.im, b.im))
        im = add(mul(a.re, b.im), mul(a.im, b.re))
    return ComplexTensor(re, im)


def split_spectrum(s: ComplexTensor, parts) -> list[ComplexTensor]:
    from .tensor import split_channels

    res = split_channels(s.re, parts)
    ims = split_channels(s.im, parts)
    return [ComplexTensor(r, i) for r, i in zip(res, ims)]


def concat_spectrum(chunks: list[ComplexTensor]) -> ComplexTensor:
    from .tensor import concat

    return ComplexTensor(
        concat([c.re for c in chunks], axis=1),
        concat([c.im for c in chunks], axis=1),
    )
