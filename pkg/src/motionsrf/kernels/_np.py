"""Vectorized numpy versions of the hot kernels.

Each function returns the same values as its counterpart in ``_nb`` up to
floating-point summation order.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

HOG_BINS = 9
HOG_EPS = 1e-5


def nms(mag, gx, gy):
    h, w = mag.shape
    ang = np.degrees(np.arctan2(gy, gx)) % 180.0
    sector = np.full(mag.shape, 3, dtype=np.int64)
    sector[(ang < 22.5) | (ang >= 157.5)] = 0
    sector[(ang >= 22.5) & (ang < 67.5)] = 1
    sector[(ang >= 67.5) & (ang < 112.5)] = 2
    padded = np.pad(mag, 1)
    offsets = [(0, 1), (1, 1), (1, 0), (1, -1)]
    keep = np.zeros(mag.shape, dtype=bool)
    for s, (dy, dx) in enumerate(offsets):
        prev = padded[1 - dy:1 - dy + h, 1 - dx:1 - dx + w]
        nxt = padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
        keep |= (sector == s) & (mag > prev) & (mag >= nxt)
    keep &= mag > 0.0
    return np.where(keep, mag, 0.0)


def hysteresis(mag, low, high):
    weak = mag > low
    strong = weak & (mag >= high)
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return np.zeros(mag.shape, dtype=bool)
    hit = np.zeros(n + 1, dtype=bool)
    hit[labels[strong]] = True
    hit[0] = False
    return hit[labels]


def _cell_weights(size, cells):
    if cells == 1:
        return np.ones((size, 1))
    half = size // 2
    idx = np.arange(size)
    w = np.zeros((size, 2))
    w[idx < half, 0] = 1.0
    w[idx > half, 1] = 1.0
    w[half] = 0.5
    return w


def orientation_hist(img, centers, size, cells):
    """Per-window orientation histograms, L2-normalized per channel block.

    ``img`` is (H, W, C); ``centers`` is (N, 2) as (row, col). Gradients use
    [-1, 0, 1] taps clamped to the window. Orientation is the edge direction,
    i.e. the gradient direction turned by 90 degrees, folded into [0, 180).
    Bins are 20 degrees wide centred at 10 + 20k with linear interpolation
    between neighbouring bins.
    """
    n = centers.shape[0]
    nch = img.shape[2]
    block = cells * cells * HOG_BINS
    if n == 0:
        return np.zeros((0, nch * block))
    half = size // 2
    windows = sliding_window_view(img, (size, size), axis=(0, 1))
    win = windows[centers[:, 0] - half, centers[:, 1] - half]  # (N, C, s, s)
    idx = np.arange(size)
    lo = np.maximum(idx - 1, 0)
    hi = np.minimum(idx + 1, size - 1)
    gx = win[..., :, hi] - win[..., :, lo]
    gy = win[..., hi, :] - win[..., lo, :]
    mag = np.sqrt(gx * gx + gy * gy)
    theta = np.degrees(np.arctan2(gx, -gy)) % 180.0
    pos = theta / (180.0 / HOG_BINS) - 0.5
    fb = np.floor(pos)
    w1 = pos - fb
    b0 = fb.astype(np.int64) % HOG_BINS
    b1 = (b0 + 1) % HOG_BINS

    wc = _cell_weights(size, cells)
    nc = (np.arange(n)[:, None] * nch + np.arange(nch)[None, :])[..., None, None]
    total = n * nch * block
    hist = np.zeros(total)
    for cy in range(cells):
        for cx in range(cells):
            spatial = wc[:, cy][:, None] * wc[:, cx][None, :]
            if not spatial.any():
                continue
            v = mag * spatial
            cell = cy * cells + cx
            for b, wb in ((b0, 1.0 - w1), (b1, w1)):
                flat = (nc * (cells * cells) + cell) * HOG_BINS + b
                hist += np.bincount(flat.ravel(), weights=(v * wb).ravel(), minlength=total)
    hist = hist.reshape(n, nch, block)
    norm = np.sqrt((hist * hist).sum(axis=2, keepdims=True) + HOG_EPS * HOG_EPS)
    return (hist / norm).reshape(n, nch * block)


def tree_apply(kind, p1, p2, thr, left, right, feats):
    n = feats.shape[0]
    node = np.zeros(n, dtype=np.int64)
    rows = np.arange(n)
    active = kind[node] != 0
    while active.any():
        r_idx = rows[active]
        nd = node[active]
        a = feats[r_idx, p1[nd]]
        b = feats[r_idx, p2[nd]]
        k = kind[nd]
        r = np.select([k == 1, k == 2, k == 3], [a, a + b, a - b], np.abs(a - b))
        node[active] = np.where(r >= thr[nd], left[nd], right[nd])
        active = kind[node] != 0
    return node


def split_group_sums(resp, thr_sorted, xc, sqn):
    t = thr_sorted.shape[0]
    g = np.searchsorted(thr_sorted, resp, side="right")
    counts = np.bincount(g, minlength=t + 1).astype(np.int64)
    sqsums = np.bincount(g, weights=sqn, minlength=t + 1)
    onehot = np.zeros((t + 1, resp.shape[0]))
    onehot[g, np.arange(resp.shape[0])] = 1.0
    return counts, onehot @ xc, sqsums


def splat(img, dx, dy):
    h, w, nch = img.shape
    ys, xs = np.mgrid[0:h, 0:w]
    tx = xs + dx
    ty = ys + dy
    fx = np.floor(tx)
    fy = np.floor(ty)
    ax = tx - fx
    ay = ty - fy
    ix = fx.astype(np.int64)
    iy = fy.astype(np.int64)
    acc = np.zeros((h * w, nch))
    wsum = np.zeros(h * w)
    src = img.reshape(-1, nch)
    for oy in (0, 1):
        wy = ay if oy else 1.0 - ay
        for ox in (0, 1):
            wgt = wy * (ax if ox else 1.0 - ax)
            yy = iy + oy
            xx = ix + ox
            ok = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w) & (wgt != 0.0)
            tgt = (yy * w + xx)[ok]
            wv = wgt[ok]
            np.add.at(wsum, tgt, wv)
            np.add.at(acc, tgt, wv[:, None] * src[ok.ravel()])
    return acc.reshape(h, w, nch), wsum.reshape(h, w)


def accumulate_patches(centers, patches, size, height, width):
    n, p, d = patches.shape
    half = size // 2
    sums = np.zeros((height, width, d))
    counts = np.zeros((height, width), dtype=np.int64)
    di, dj = np.divmod(np.arange(p), size)
    rows = (centers[:, 0, None] - half + di[None, :]).ravel()
    cols = (centers[:, 1, None] - half + dj[None, :]).ravel()
    np.add.at(counts, (rows, cols), 1)
    np.add.at(sums, (rows, cols), patches.reshape(n * p, d))
    return sums, counts
