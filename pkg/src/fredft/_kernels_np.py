"""Pure-numpy kernel implementations (fallback path for the numba kernels)."""

import numpy as np


# ---------------------------------------------------------------------------
# FFT
# ---------------------------------------------------------------------------


def fft_pow2_batch(z: np.ndarray, rev: np.ndarray, tw: np.ndarray) -> np.ndarray:
    """Iterative radix-2 DIT FFT of each row; n must be a power of two.

    `rev` is the bit-reversal permutation, `tw` the length-n/2 twiddle table
    exp(-2*pi*i*t/n).
    """
    n = z.shape[1]
    out = np.ascontiguousarray(z[:, rev])
    m = 1
    while m < n:
        stride = n // (2 * m)
        w = tw[: m * stride : stride]
        blocks = out.reshape(z.shape[0], n // (2 * m), 2 * m)
        a = blocks[:, :, :m].copy()
        t = blocks[:, :, m:] * w
        blocks[:, :, :m] = a + t
        blocks[:, :, m:] = a - t
        m *= 2
    return out


def bluestein_batch(z, chirp, fb, m, rev, tw):
    """Arbitrary-length DFT via the chirp-z embedding into a length-m FFT."""
    n = z.shape[1]
    buf = np.zeros((z.shape[0], m), dtype=np.complex128)
    buf[:, :n] = z * chirp
    spec = fft_pow2_batch(buf, rev, tw)
    spec *= fb
    conv = np.conj(fft_pow2_batch(np.conj(spec), rev, tw)) / m
    return conv[:, :n] * chirp


# ---------------------------------------------------------------------------
# Dense convolutions (stride 1, zero same-padding p = d*(k-1)/2).
# ---------------------------------------------------------------------------


def _im2col(x: np.ndarray, k: int, d: int) -> np.ndarray:
    """(N,C,H,W) -> (N,C,k,k,H,W) window view stack with zero padding."""
    n, c, h, w = x.shape
    p = d * (k - 1) // 2
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    cols = np.empty((n, c, k, k, h, w), dtype=np.float64)
    for i in range(k):
        for j in range(k):
            cols[:, :, i, j] = xp[:, :, i * d : i * d + h, j * d : j * d + w]
    return cols


def conv2d_fwd(x, w, b, dilation):
    k = w.shape[2]
    if k == 1:
        n, c, h, wd = x.shape
        y = np.matmul(w[:, :, 0, 0], x.reshape(n, c, h * wd)).reshape(n, -1, h, wd)
    else:
        cols = _im2col(x, k, dilation)
        y = np.einsum("ncijhw,ocij->nohw", cols, w, optimize=True)
    if b is not None:
        y += b[None, :, None, None]
    return y


def conv2d_bwd(x, w, g, dilation):
    n, c, h, wd = x.shape
    k = w.shape[2]
    d = dilation
    p = d * (k - 1) // 2
    gb = g.sum(axis=(0, 2, 3))
    if k == 1:
        gw = np.matmul(
            g.reshape(n, -1, h * wd), x.reshape(n, c, h * wd).transpose(0, 2, 1)
        ).sum(axis=0)[:, :, None, None]
        gx = np.matmul(w[:, :, 0, 0].T, g.reshape(n, -1, h * wd)).reshape(n, c, h, wd)
        return gx, gw, gb
    cols = _im2col(x, k, d)
    gw = np.einsum("nohw,ncijhw->ocij", g, cols, optimize=True)
    gxp = np.zeros((n, c, h + 2 * p, wd + 2 * p), dtype=np.float64)
    for i in range(k):
        for j in range(k):
            gxp[:, :, i * d : i * d + h, j * d : j * d + wd] += np.einsum(
                "nohw,oc->nchw", g, w[:, :, i, j], optimize=True
            )
    gx = gxp[:, :, p : p + h, p : p + wd]
    return gx, gw, gb


def dwconv2d_fwd(x, w, b, dilation):
    k = w.shape[1]
    cols = _im2col(x, k, dilation)
    y = np.einsum("ncijhw,cij->nchw", cols, w, optimize=True)
    if b is not None:
        y += b[None, :, None, None]
    return y


def dwconv2d_bwd(x, w, g, dilation):
    n, c, h, wd = x.shape
    k = w.shape[1]
    d = dilation
    p = d * (k - 1) // 2
    gb = g.sum(axis=(0, 2, 3))
    cols = _im2col(x, k, d)
    gw = np.einsum("nchw,ncijhw->cij", g, cols, optimize=True)
    gxp = np.zeros((n, c, h + 2 * p, wd + 2 * p), dtype=np.float64)
    for i in range(k):
        for j in range(k):
            gxp[:, :, i * d : i * d + h, j * d : j * d + wd] += (
                g * w[None, :, i, j, None, None]
            )
    gx = gxp[:, :, p : p + h, p : p + wd]
    return gx, gw, gb


# ---------------------------------------------------------------------------
# Deformable convolution v1 (bilinear sampling, out-of-bounds taps read zero).
# ---------------------------------------------------------------------------


def _deform_sample_coords(off, k, d, h, w):
    """Per-tap fractional sample coordinates, shape (N, k*k, H, W) for y and x."""
    p = d * (k - 1) // 2
    gy = np.arange(h, dtype=np.float64)[None, None, :, None]
    gx = np.arange(w, dtype=np.float64)[None, None, None, :]
    iy = (np.repeat(np.arange(k), k) * d - p).astype(np.float64)[None, :, None, None]
    ix = (np.tile(np.arange(k), k) * d - p).astype(np.float64)[None, :, None, None]
    sy = gy + iy + off[:, 0::2]
    sx = gx + ix + off[:, 1::2]
    return sy, sx


def _bilinear_gather(x, sy, sx):
    """Sample x (N,C,H,W) at (sy, sx) (N,T,H,W) -> values (N,C,T,H,W) plus
    the pieces needed for the coordinate derivative."""
    n, c, h, w = x.shape
    y0 = np.floor(sy)
    x0 = np.floor(sx)
    wy = sy - y0
    wx = sx - x0
    vals = np.zeros((n, c, *sy.shape[1:]), dtype=np.float64)
    dvy = np.zeros_like(vals)
    dvx = np.zeros_like(vals)
    bidx = np.arange(n)[:, None, None, None]
    for dy in (0, 1):
        for dx in (0, 1):
            yy = y0 + dy
            xx = x0 + dx
            ok = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
            yi = np.clip(yy, 0, h - 1).astype(np.int64)
            xi = np.clip(xx, 0, w - 1).astype(np.int64)
            v = x[bidx, :, yi, xi]  # (N,T,H,W,C)
            v = np.moveaxis(v, -1, 1) * ok[:, None]
            wgt = (wy if dy else 1.0 - wy) * (wx if dx else 1.0 - wx)
            vals += v * wgt[:, None]
            dvy += v * (1.0 if dy else -1.0) * (wx if dx else 1.0 - wx)[:, None]
            dvx += v * (wy if dy else 1.0 - wy)[:, None] * (1.0 if dx else -1.0)
    return vals, dvy, dvx


def deform_conv2d_fwd(x, off, w, b, dilation):
    n, c, h, wd = x.shape
    k = w.shape[2]
    sy, sx = _deform_sample_coords(off, k, dilation, h, wd)
    vals, _, _ = _bilinear_gather(x, sy, sx)
    y = np.einsum("ncthw,oct->nohw", vals, w.reshape(w.shape[0], c, k * k), optimize=True)
    if b is not None:
        y += b[None, :, None, None]
    return y


def deform_conv2d_bwd(x, off, w, g, dilation):
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    sy, sx = _deform_sample_coords(off, k, dilation, h, wd)
    vals, dvy, dvx = _bilinear_gather(x, sy, sx)
    wk = w.reshape(o, c, k * k)
    gb = g.sum(axis=(0, 2, 3))
    gw = np.einsum("nohw,ncthw->oct", g, vals, optimize=True).reshape(o, c, k, k)
    gs = np.einsum("nohw,oct->ncthw", g, wk, optimize=True)  # d loss / d sample value
    goy = (gs * dvy).sum(axis=1)
    gox = (gs * dvx).sum(axis=1)
    goff = np.empty_like(off)
    goff[:, 0::2] = goy
    goff[:, 1::2] = gox
    # scatter sample-value gradients back through the bilinear taps
    y0 = np.floor(sy)
    x0 = np.floor(sx)
    wy = sy - y0
    wx = sx - x0
    gx = np.zeros_like(x)
    bidx = np.broadcast_to(np.arange(n)[:, None, None, None], sy.shape)
    for dy in (0, 1):
        for dx in (0, 1):
            yy = y0 + dy
            xx = x0 + dx
            ok = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < wd)
            yi = np.clip(yy, 0, h - 1).astype(np.int64)
            xi = np.clip(xx, 0, wd - 1).astype(np.int64)
            wgt = (wy if dy else 1.0 - wy) * (wx if dx else 1.0 - wx) * ok
            contrib = gs * wgt[:, None]  # (N,C,T,H,W)
            cidx = np.arange(c)[None, :, None, None, None]
            np.add.at(gx, (bidx[:, None], cidx, yi[:, None], xi[:, None]), contrib)
    return gx, goff, gw, gb
