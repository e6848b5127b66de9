"""Benchmarks: attention scaling (spatial vs frequency domain) and the
numba-vs-numpy kernel backend comparison. Output is CSV plus fitted log-log
slopes."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import backend
from .fusion import MFDA, MSDA, FreDFTConfig
from .tensor import ModalityPair, Tensor, no_grad


@dataclass
class BenchRow:
    size: int
    kernel: str
    tokens: int
    median_s: float


def _median_time(fn, repeats: int) -> float:
    fn()  # warmup (JIT compilation, allocator)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def fit_loglog_slope(tokens: list[int], seconds: list[float]) -> float:
    """Least-squares slope of log(time) against log(token count)."""
    return float(np.polyfit(np.log(np.asarray(tokens, dtype=np.float64)),
                            np.log(np.asarray(seconds, dtype=np.float64)), 1)[0])


def bench_attention(
    sizes=(16, 32, 64, 128), channels: int = 32, repeats: int = 5, seed: int = 0
) -> tuple[list[BenchRow], dict[str, float]]:
    """Median forward wall-clock of both attention kernels per spatial size."""
    if repeats < 5:
        raise ValueError("repeats must be >= 5 (medians are taken)")
    rows: list[BenchRow] = []
    rng = np.random.default_rng(seed)
    cfg = FreDFTConfig(channels=channels)
    modules = {
        "msda": MSDA(cfg, rng=np.random.default_rng(seed + 1)).eval(),
        "mfda": MFDA(cfg, rng=np.random.default_rng(seed + 2)).eval(),
    }
    with no_grad():
        for size in sizes:
            pair = ModalityPair(
                Tensor(rng.uniform(-1, 1, (1, channels, size, size))),
                Tensor(rng.uniform(-1, 1, (1, channels, size, size))),
            )
            for name, module in modules.items():
                med = _median_time(lambda m=module, p=pair: m(p), repeats)
                rows.append(BenchRow(size, name, size * size, med))
    slopes = {}
    for name in modules:
        pts = [(r.tokens, r.median_s) for r in rows if r.kernel == name]
        slopes[name] = fit_loglog_slope([p[0] for p in pts], [p[1] for p in pts])
    return rows, slopes


def attention_csv(rows: list[BenchRow]) -> str:
    lines = ["size,kernel,tokens,median_seconds"]
    for r in rows:
        lines.append(f"{r.size},{r.kernel},{r.tokens},{r.median_s:.9f}")
    return "\n".join(lines) + "\n"


def bench_kernels(repeats: int = 5, seed: int = 0) -> list[tuple[str, str, float]]:
    """Time the hot kernels on both backends: (kernel, backend, median_s)."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, (2, 32, 32, 32))
    w = rng.uniform(-1, 1, (32, 32, 3, 3))
    b = rng.uniform(-1, 1, 32)
    wd = rng.uniform(-1, 1, (32, 3, 3))
    off = rng.uniform(-0.4, 0.4, (2, 18, 32, 32))
    z = (rng.uniform(-1, 1, (64, 80)) + 1j * rng.uniform(-1, 1, (64, 80))).astype(
        np.complex128
    )
    cases = {
        "conv2d_3x3": lambda: backend.conv2d_fwd(x, w, b, 1),
        "dwconv2d_3x3": lambda: backend.dwconv2d_fwd(x, wd, b, 1),
        "deform_conv2d": lambda: backend.deform_conv2d_fwd(x, off, w, b, 1),
        "fft_len80": lambda: backend.dft1d_batch(z),
    }
    backends = ["numpy"] + (["numba"] if backend.NUMBA_AVAILABLE else [])
    was_numba = backend.using_numba()
    results = []
    try:
        for name in backends:
            backend.use_numba(name == "numba")
            for kernel, fn in cases.items():
                results.append((kernel, name, _median_time(fn, repeats)))
    finally:
        backend.use_numba(was_numba)
    return results


def kernels_csv(rows: list[tuple[str, str, float]]) -> str:
    lines = ["kernel,backend,median_seconds"]
    for kernel, name, med in rows:
        lines.append(f"{kernel},{name},{med:.9f}")
    return "\n".join(lines) + "\n"
