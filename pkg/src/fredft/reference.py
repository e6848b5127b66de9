"""Independent brute-force oracles used by the verification suites and tests.

Everything here is written as direct summation straight from the defining
formulas, deliberately sharing no code with the fast paths it checks.
"""

from __future__ import annotations

import numpy as np


def naive_dft2d(x: np.ndarray) -> np.ndarray:
    """O(N^2) forward DFT over the trailing two axes."""
    x = np.asarray(x, dtype=np.complex128)
    h, w = x.shape[-2], x.shape[-1]
    ey = np.exp(-2j * np.pi * np.outer(np.arange(h), np.arange(h)) / h)
    ex = np.exp(-2j * np.pi * np.outer(np.arange(w), np.arange(w)) / w)
    out = np.empty_like(x)
    flat = x.reshape(-1, h, w)
    res = out.reshape(-1, h, w)
    for s in range(flat.shape[0]):
        acc = np.zeros((h, w), dtype=np.complex128)
        for u in range(h):
            for v in range(w):
                acc[u, v] = np.sum(flat[s] * np.outer(ey[u], ex[v]))
        res[s] = acc
    return out


def circular_conv2d(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Brute-force 2D circular convolution over the trailing two axes."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    h, w = a.shape[-2], a.shape[-1]
    out = np.zeros_like(a)
    fa = a.reshape(-1, h, w)
    fb = b.reshape(-1, h, w)
    fo = out.reshape(-1, h, w)
    for s in range(fa.shape[0]):
        for y in range(h):
            for x in range(w):
                acc = 0.0
                for u in range(h):
                    for v in range(w):
                        acc += fa[s, u, v] * fb[s, (y - u) % h, (x - v) % w]
                fo[s, y, x] = acc
    return out


def naive_conv2d(x, w, b, dilation=1, depthwise=False):
    """Direct-summation cross-correlation, stride 1, zero same-padding."""
    n, c, h, wd = x.shape
    k = w.shape[-1]
    p = dilation * (k - 1) // 2
    o = w.shape[0]
    y = np.zeros((n, o, h, wd))
    for nn in range(n):
        for oo in range(o):
            for hh in range(h):
                for ww in range(wd):
                    acc = 0.0 if b is None else b[oo]
                    channels = [oo] if depthwise else range(c)
                    for cc in channels:
                        for i in range(k):
                            for j in range(k):
                                yy = hh + dilation * i - p
                                xx = ww + dilation * j - p
                                if 0 <= yy < h and 0 <= xx < wd:
                                    wt = w[oo, i, j] if depthwise else w[oo, cc, i, j]
                                    acc += wt * x[nn, cc, yy, xx]
                    y[nn, oo, hh, ww] = acc
    return y


def bilinear_sample(img: np.ndarray, sy: float, sx: float) -> float:
    """Single bilinear read with zero outside the grid."""
    h, w = img.shape
    y0 = int(np.floor(sy))
    x0 = int(np.floor(sx))
    total = 0.0
    for dy in (0, 1):
        for dx in (0, 1):
            yy, xx = y0 + dy, x0 + dx
            if 0 <= yy < h and 0 <= xx < w:
                wy = sy - y0 if dy else 1.0 - (sy - y0)
                wx = sx - x0 if dx else 1.0 - (sx - x0)
                total += wy * wx * img[yy, xx]
    return total


def naive_deform_conv2d(x, off, w, b, dilation=1):
    """Direct deformable-v1 forward: per-tap offsets, bilinear gather."""
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    p = dilation * (k - 1) // 2
    y = np.zeros((n, o, h, wd))
    for nn in range(n):
        for hh in range(h):
            for ww in range(wd):
                for oo in range(o):
                    acc = 0.0 if b is None else b[oo]
                    for i in range(k):
                        for j in range(k):
                            t = i * k + j
                            sy = hh + dilation * i - p + off[nn, 2 * t, hh, ww]
                            sx = ww + dilation * j - p + off[nn, 2 * t + 1, hh, ww]
                            for cc in range(c):
                                acc += w[oo, cc, i, j] * bilinear_sample(
                                    x[nn, cc], sy, sx
                                )
                    y[nn, oo, hh, ww] = acc
    return y
