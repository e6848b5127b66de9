"""Frequency-domain visible/infrared feature fusion on a from-scratch
float64 tensor, autodiff, FFT and convolution stack, with a desk-scale
detection harness and verification suites."""

from .autodiff import GradReport, backward, gradcheck
from .fft import ComplexTensor, SpectrumTensor, fft2d, ifft2d, spectrum_mul, take_real
from .fusion import (
    CGMM,
    FDFAM,
    FDFFL,
    LFEM,
    MFDA,
    MLPFFL,
    MSDA,
    FreDFTBlock,
    FreDFTConfig,
)
from .tensor import ModalityPair, Tensor, no_grad

__version__ = "0.1.0"

__all__ = [
    "Tensor",
    "ComplexTensor",
    "SpectrumTensor",
    "ModalityPair",
    "no_grad",
    "backward",
    "gradcheck",
    "GradReport",
    "fft2d",
    "ifft2d",
    "take_real",
    "spectrum_mul",
    "FreDFTConfig",
    "FreDFTBlock",
    "LFEM",
    "CGMM",
    "MFDA",
    "MSDA",
    "FDFFL",
    "MLPFFL",
    "FDFAM",
    "__version__",
]
