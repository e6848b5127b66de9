"""Numba-compiled hot kernels. Mirrors the _kernels_np function surface."""

import numba
import numpy as np
from numba import njit


def setup_threads(cap: int) -> None:
    """Apply the FREDFT_THREADS cap; 0 means single-threaded mode."""
    limit = numba.config.NUMBA_NUM_THREADS
    numba.set_num_threads(max(1, min(cap, limit)) if cap else 1)


# ---------------------------------------------------------------------------
# FFT
# ---------------------------------------------------------------------------


@njit(cache=True)
def _fft_pow2_row(out, row, n, rev, tw):
    for i in range(n):
        out[i] = row[rev[i]]
    m = 1
    while m < n:
        stride = n // (2 * m)
        for start in range(0, n, 2 * m):
            for t in range(m):
                w = tw[t * stride]
                a = out[start + t]
                v = out[start + t + m] * w
                out[start + t] = a + v
                out[start + t + m] = a - v
        m *= 2


@njit(cache=True)
def fft_pow2_batch(z, rev, tw):
    nb, n = z.shape
    out = np.empty((nb, n), dtype=np.complex128)
    for b in range(nb):
        _fft_pow2_row(out[b], z[b], n, rev, tw)
    return out


@njit(cache=True)
def bluestein_batch(z, chirp, fb, m, rev, tw):
    nb, n = z.shape
    out = np.empty((nb, n), dtype=np.complex128)
    buf = np.zeros(m, dtype=np.complex128)
    spec = np.empty(m, dtype=np.complex128)
    conv = np.empty(m, dtype=np.complex128)
    for b in range(nb):
        for i in range(m):
            buf[i] = 0.0
        for i in range(n):
            buf[i] = z[b, i] * chirp[i]
        _fft_pow2_row(spec, buf, m, rev, tw)
        for i in range(m):
            spec[i] = np.conj(spec[i] * fb[i])
        _fft_pow2_row(conv, spec, m, rev, tw)
        for i in range(n):
            out[b, i] = np.conj(conv[i]) / m * chirp[i]
    return out


# ---------------------------------------------------------------------------
# Dense convolutions (stride 1, zero same-padding p = d*(k-1)/2).
# ---------------------------------------------------------------------------


@njit(cache=True)
def conv2d_fwd(x, w, b, dilation):
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    p = dilation * (k - 1) // 2
    y = np.empty((n, o, h, wd))
    for nn in range(n):
        for oo in range(o):
            base = 0.0 if b is None else b[oo]
            for hh in range(h):
                for ww in range(wd):
                    y[nn, oo, hh, ww] = base
            for cc in range(c):
                for i in range(k):
                    for j in range(k):
                        wt = w[oo, cc, i, j]
                        if wt == 0.0:
                            continue
                        dy = dilation * i - p
                        dx = dilation * j - p
                        h0 = max(0, -dy)
                        h1 = min(h, h - dy)
                        w0 = max(0, -dx)
                        w1 = min(wd, wd - dx)
                        for hh in range(h0, h1):
                            for ww in range(w0, w1):
                                y[nn, oo, hh, ww] += wt * x[nn, cc, hh + dy, ww + dx]
    return y


@njit(cache=True)
def conv2d_bwd(x, w, g, dilation):
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    p = dilation * (k - 1) // 2
    gx = np.zeros((n, c, h, wd))
    gw = np.zeros((o, c, k, k))
    gb = np.zeros(o)
    for nn in range(n):
        for oo in range(o):
            for hh in range(h):
                for ww in range(wd):
                    gb[oo] += g[nn, oo, hh, ww]
            for cc in range(c):
                for i in range(k):
                    for j in range(k):
                        dy = dilation * i - p
                        dx = dilation * j - p
                        h0 = max(0, -dy)
                        h1 = min(h, h - dy)
                        w0 = max(0, -dx)
                        w1 = min(wd, wd - dx)
                        wt = w[oo, cc, i, j]
                        acc = 0.0
                        for hh in range(h0, h1):
                            for ww in range(w0, w1):
                                gg = g[nn, oo, hh, ww]
                                acc += gg * x[nn, cc, hh + dy, ww + dx]
                                gx[nn, cc, hh + dy, ww + dx] += gg * wt
                        gw[oo, cc, i, j] += acc
    return gx, gw, gb


@njit(cache=True)
def dwconv2d_fwd(x, w, b, dilation):
    n, c, h, wd = x.shape
    k = w.shape[1]
    p = dilation * (k - 1) // 2
    y = np.empty((n, c, h, wd))
    for nn in range(n):
        for cc in range(c):
            base = 0.0 if b is None else b[cc]
            for hh in range(h):
                for ww in range(wd):
                    y[nn, cc, hh, ww] = base
            for i in range(k):
                for j in range(k):
                    wt = w[cc, i, j]
                    if wt == 0.0:
                        continue
                    dy = dilation * i - p
                    dx = dilation * j - p
                    h0 = max(0, -dy)
                    h1 = min(h, h - dy)
                    w0 = max(0, -dx)
                    w1 = min(wd, wd - dx)
                    for hh in range(h0, h1):
                        for ww in range(w0, w1):
                            y[nn, cc, hh, ww] += wt * x[nn, cc, hh + dy, ww + dx]
    return y


@njit(cache=True)
def dwconv2d_bwd(x, w, g, dilation):
    n, c, h, wd = x.shape
    k = w.shape[1]
    p = dilation * (k - 1) // 2
    gx = np.zeros((n, c, h, wd))
    gw = np.zeros((c, k, k))
    gb = np.zeros(c)
    for nn in range(n):
        for cc in range(c):
            for hh in range(h):
                for ww in range(wd):
                    gb[cc] += g[nn, cc, hh, ww]
            for i in range(k):
                for j in range(k):
                    dy = dilation * i - p
                    dx = dilation * j - p
                    h0 = max(0, -dy)
                    h1 = min(h, h - dy)
                    w0 = max(0, -dx)
                    w1 = min(wd, wd - dx)
                    wt = w[cc, i, j]
                    acc = 0.0
                    for hh in range(h0, h1):
                        for ww in range(w0, w1):
                            gg = g[nn, cc, hh, ww]
                            acc += gg * x[nn, cc, hh + dy, ww + dx]
                            gx[nn, cc, hh + dy, ww + dx] += gg * wt
                    gw[cc, i, j] += acc
    return gx, gw, gb


# ---------------------------------------------------------------------------
# Deformable convolution v1.
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _bilinear(x, nn, cc, sy, sx, h, w):
    if sy <= -1.0 or sy >= h or sx <= -1.0 or sx >= w:
        return 0.0
    y0 = int(np.floor(sy))
    x0 = int(np.floor(sx))
    wy = sy - y0
    wx = sx - x0
    v = 0.0
    if 0 <= y0 < h:
        if 0 <= x0 < w:
            v += (1.0 - wy) * (1.0 - wx) * x[nn, cc, y0, x0]
        if 0 <= x0 + 1 < w:
            v += (1.0 - wy) * wx * x[nn, cc, y0, x0 + 1]
    if 0 <= y0 + 1 < h:
        if 0 <= x0 < w:
            v += wy * (1.0 - wx) * x[nn, cc, y0 + 1, x0]
        if 0 <= x0 + 1 < w:
            v += wy * wx * x[nn, cc, y0 + 1, x0 + 1]
    return v


@njit(cache=True)
def deform_conv2d_fwd(x, off, w, b, dilation):
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    p = dilation * (k - 1) // 2
    y = np.empty((n, o, h, wd))
    for nn in range(n):
        for hh in range(h):
            for ww in range(wd):
                for oo in range(o):
                    y[nn, oo, hh, ww] = 0.0 if b is None else b[oo]
                for i in range(k):
                    for j in range(k):
                        t = i * k + j
                        sy = hh + dilation * i - p + off[nn, 2 * t, hh, ww]
                        sx = ww + dilation * j - p + off[nn, 2 * t + 1, hh, ww]
                        for cc in range(c):
                            v = _bilinear(x, nn, cc, sy, sx, h, wd)
                            if v == 0.0:
                                continue
                            for oo in range(o):
                                y[nn, oo, hh, ww] += w[oo, cc, i, j] * v
    return y


@njit(cache=True)
def deform_conv2d_bwd(x, off, w, g, dilation):
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    p = dilation * (k - 1) // 2
    gx = np.zeros((n, c, h, wd))
    goff = np.zeros_like(off)
    gw = np.zeros((o, c, k, k))
    gb = np.zeros(o)
    for nn in range(n):
        for hh in range(h):
            for ww in range(wd):
                for oo in range(o):
                    gb[oo] += g[nn, oo, hh, ww]
                for i in range(k):
                    for j in range(k):
                        t = i * k + j
                        sy = hh + dilation * i - p + off[nn, 2 * t, hh, ww]
                        sx = ww + dilation * j - p + off[nn, 2 * t + 1, hh, ww]
                        if sy <= -1.0 or sy >= h or sx <= -1.0 or sx >= wd:
                            continue
                        y0 = int(np.floor(sy))
                        x0 = int(np.floor(sx))
                        wy = sy - y0
                        wx = sx - x0
                        gy_acc = 0.0
                        gx_acc = 0.0
                        for cc in range(c):
                            gs = 0.0  # d loss / d sampled value for this (c, tap)
                            for oo in range(o):
                                gs += g[nn, oo, hh, ww] * w[oo, cc, i, j]
                            v = 0.0
                            dvy = 0.0
                            dvx = 0.0
                            if 0 <= y0 < h and 0 <= x0 < wd:
                                xv = x[nn, cc, y0, x0]
                                v += (1.0 - wy) * (1.0 - wx) * xv
                                dvy -= (1.0 - wx) * xv
                                dvx -= (1.0 - wy) * xv
                                gx[nn, cc, y0, x0] += gs * (1.0 - wy) * (1.0 - wx)
                            if 0 <= y0 < h and 0 <= x0 + 1 < wd:
                                xv = x[nn, cc, y0, x0 + 1]
                                v += (1.0 - wy) * wx * xv
                                dvy -= wx * xv
                                dvx += (1.0 - wy) * xv
                                gx[nn, cc, y0, x0 + 1] += gs * (1.0 - wy) * wx
                            if 0 <= y0 + 1 < h and 0 <= x0 < wd:
                                xv = x[nn, cc, y0 + 1, x0]
                                v += wy * (1.0 - wx) * xv
                                dvy += (1.0 - wx) * xv
                                dvx -= wy * xv
                                gx[nn, cc, y0 + 1, x0] += gs * wy * (1.0 - wx)
                            if 0 <= y0 + 1 < h and 0 <= x0 + 1 < wd:
                                xv = x[nn, cc, y0 + 1, x0 + 1]
                                v += wy * wx * xv
                                dvy += wx * xv
                                dvx += wy * xv
                                gx[nn, cc, y0 + 1, x0 + 1] += gs * wy * wx
                            for oo in range(o):
                                gw[oo, cc, i, j] += g[nn, oo, hh, ww] * v
                            gy_acc += gs * dvy
                            gx_acc += gs * dvx
                        goff[nn, 2 * t, hh, ww] = gy_acc
                        goff[nn, 2 * t + 1, hh, ww] = gx_acc
    return gx, goff, gw, gb
