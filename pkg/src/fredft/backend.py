"""Kernel backend selection: numba-accelerated hot loops with a pure-numpy fallback.

The active backend is chosen at import time from the ``FREDFT_NUMBA`` env var
("1" forces numba, "0" forces numpy, unset picks numba when importable) and can
be switched at runtime with `use_numba` (used by the backend benchmark).
``FREDFT_THREADS`` caps numba worker threads; absent or 0 means the
single-threaded deterministic mode. All kernels produce bit-identical results
for a fixed backend regardless of the thread cap because parallel loops only
ever split element-independent work.
"""

import os

import numpy as np

from . import _kernels_np

NUMBA_AVAILABLE = False
_kernels_nb = None

_env = os.environ.get("FREDFT_NUMBA", "").strip()
if _env != "0":
    try:
        from . import _kernels_nb as _nb_mod

        _kernels_nb = _nb_mod
        NUMBA_AVAILABLE = True
    except ImportError:
        if _env == "1":
            raise
        _kernels_nb = None

_active = _kernels_nb if NUMBA_AVAILABLE else _kernels_np


def thread_cap() -> int:
    """Worker-thread cap from FREDFT_THREADS (0/absent = single-threaded)."""
    raw = os.environ.get("FREDFT_THREADS", "").strip()
    if not raw:
        return 0
    n = int(raw)
    if n < 0:
        raise ValueError(f"FREDFT_THREADS must be >= 0, got {n}")
    return n


if NUMBA_AVAILABLE and thread_cap() > 1:
    _kernels_nb.setup_threads(thread_cap())


def use_numba(flag: bool) -> None:
    """Switch the active backend at runtime (no-op guard if numba is missing)."""
    global _active
    if flag and not NUMBA_AVAILABLE:
        raise RuntimeError("numba backend requested but numba is not importable")
    _active = _kernels_nb if flag else _kernels_np


def using_numba() -> bool:
    return _active is _kernels_nb


def backend_name() -> str:
    return "numba" if using_numba() else "numpy"


# ---------------------------------------------------------------------------
# 1D DFT dispatch with cached per-length twiddle/chirp tables.
#
# Forward transform is the unnormalized DFT. Power-of-two lengths run the
# iterative radix-2 kernel; everything else goes through Bluestein's chirp-z
# embedding into a power-of-two circular convolution.
# ---------------------------------------------------------------------------

_plan_cache: dict[int, tuple] = {}


def _bit_reverse_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    rev = np.zeros(n, dtype=np.int64)
    for i in range(n):
        r = 0
        v = i
        for _ in range(bits):
            r = (r << 1) | (v & 1)
            v >>= 1
        rev[i] = r
    return rev


def _pow2_tables(n: int) -> tuple[np.ndarray, np.ndarray]:
    rev = _bit_reverse_indices(n)
    tw = np.exp(-2j * np.pi * np.arange(n // 2) / n).astype(np.complex128)
    return rev, tw


def _plan(n: int) -> tuple:
    plan = _plan_cache.get(n)
    if plan is not None:
        return plan
    if n & (n - 1) == 0:
        rev, tw = _pow2_tables(n)
        plan = ("pow2", rev, tw)
    else:
        m = 1
        while m < 2 * n - 1:
            m *= 2
        k = np.arange(n, dtype=np.float64)
        chirp = np.exp(-1j * np.pi * k * k / n).astype(np.complex128)
        b = np.zeros(m, dtype=np.complex128)
        b[:n] = np.conj(chirp)
        b[m - n + 1:] = np.conj(chirp[1:][::-1])
        rev, tw = _pow2_tables(m)
        fb = _kernels_np.fft_pow2_batch(b[None, :], rev, tw)[0]
        plan = ("bluestein", chirp, fb, m, rev, tw)
    _plan_cache[n] = plan
    return plan


def dft1d_batch(z: np.ndarray) -> np.ndarray:
    """Unnormalized forward DFT of each row of a (batch, n) complex array."""
    z = np.ascontiguousarray(z, dtype=np.complex128)
    n = z.shape[1]
    if n == 1:
        return z.copy()
    plan = _plan(n)
    if plan[0] == "pow2":
        _, rev, tw = plan
        return _active.fft_pow2_batch(z, rev, tw)
    _, chirp, fb, m, rev, tw = plan
    return _active.bluestein_batch(z, chirp, fb, m, rev, tw)


def dft1d_batch_bluestein(z: np.ndarray) -> np.ndarray:
    """Force the Bluestein path regardless of length (cross-path checks)."""
    z = np.ascontiguousarray(z, dtype=np.complex128)
    n = z.shape[1]
    m = 1
    while m < 2 * n - 1:
        m *= 2
    k = np.arange(n, dtype=np.float64)
    chirp = np.exp(-1j * np.pi * k * k / n).astype(np.complex128)
    b = np.zeros(m, dtype=np.complex128)
    b[:n] = np.conj(chirp)
    b[m - n + 1:] = np.conj(chirp[1:][::-1])
    rev, tw = _pow2_tables(m)
    fb = _kernels_np.fft_pow2_batch(b[None, :], rev, tw)[0]
    return _active.bluestein_batch(z, chirp, fb, m, rev, tw)


def dft2(z: np.ndarray) -> np.ndarray:
    """Unnormalized forward 2D DFT over the trailing (H, W) axes."""
    z = np.asarray(z, dtype=np.complex128)
    lead = z.shape[:-2]
    h, w = z.shape[-2], z.shape[-1]
    out = dft1d_batch(z.reshape(-1, w)).reshape(*lead, h, w)
    out = np.ascontiguousarray(np.swapaxes(out, -1, -2))
    out = dft1d_batch(out.reshape(-1, h)).reshape(*lead, w, h)
    return np.ascontiguousarray(np.swapaxes(out, -1, -2))


def idft2(z: np.ndarray) -> np.ndarray:
    """Inverse 2D DFT with 1/(H*W) normalization."""
    h, w = z.shape[-2], z.shape[-1]
    return np.conj(dft2(np.conj(z))) / (h * w)


# ---------------------------------------------------------------------------
# Convolution kernel dispatch (raw float64 arrays, NCHW).
# ---------------------------------------------------------------------------


def conv2d_fwd(x, w, b, dilation):
    return _active.conv2d_fwd(x, w, b, dilation)


def conv2d_bwd(x, w, g, dilation):
    return _active.conv2d_bwd(x, w, g, dilation)


def dwconv2d_fwd(x, w, b, dilation):
    return _active.dwconv2d_fwd(x, w, b, dilation)


def dwconv2d_bwd(x, w, g, dilation):
    return _active.dwconv2d_bwd(x, w, g, dilation)


def deform_conv2d_fwd(x, off, w, b, dilation):
    return _active.deform_conv2d_fwd(x, off, w, b, dilation)


def deform_conv2d_bwd(x, off, w, g, dilation):
    return _active.deform_conv2d_bwd(x, off, w, g, dilation)
