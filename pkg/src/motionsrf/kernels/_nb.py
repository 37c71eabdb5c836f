"""Numba kernels. Signatures mirror ``_np`` one-to-one."""

import math

import numba as nb
import numpy as np

_OPTS = dict(cache=True, nogil=True, error_model="numpy")

HOG_BINS = 9
HOG_EPS = 1e-5


@nb.njit(**_OPTS)
def nms(mag, gx, gy):
    h, w = mag.shape
    out = np.zeros_like(mag)
    for y in range(h):
        for x in range(w):
            m = mag[y, x]
            if m <= 0.0:
                continue
            ang = math.degrees(math.atan2(gy[y, x], gx[y, x])) % 180.0
            if ang < 22.5 or ang >= 157.5:
                dy, dx = 0, 1
            elif ang < 67.5:
                dy, dx = 1, 1
            elif ang < 112.5:
                dy, dx = 1, 0
            else:
                dy, dx = 1, -1
            py, px = y - dy, x - dx
            ny, nx = y + dy, x + dx
            prev = mag[py, px] if 0 <= py < h and 0 <= px < w else 0.0
            nxt = mag[ny, nx] if 0 <= ny < h and 0 <= nx < w else 0.0
            # strict on one side, loose on the other: plateaus of two keep one pixel
            if m > prev and m >= nxt:
                out[y, x] = m
    return out


@nb.njit(**_OPTS)
def hysteresis(mag, low, high):
    h, w = mag.shape
    out = np.zeros((h, w), dtype=np.bool_)
    stack = np.empty((h * w, 2), dtype=np.int64)
    top = 0
    for y in range(h):
        for x in range(w):
            if mag[y, x] > low and mag[y, x] >= high:
                out[y, x] = True
                stack[top, 0] = y
                stack[top, 1] = x
                top += 1
    while top > 0:
        top -= 1
        y = stack[top, 0]
        x = stack[top, 1]
        for dy in range(-1, 2):
            for dx in range(-1, 2):
                ny = y + dy
                nx_ = x + dx
                if 0 <= ny < h and 0 <= nx_ < w and not out[ny, nx_] and mag[ny, nx_] > low:
                    out[ny, nx_] = True
                    stack[top, 0] = ny
                    stack[top, 1] = nx_
                    top += 1
    return out


@nb.njit(**_OPTS)
def orientation_hist(img, centers, size, cells):
    """Per-window orientation histograms; see ``_np.orientation_hist``."""
    n = centers.shape[0]
    nch = img.shape[2]
    half = size // 2
    block = cells * cells * HOG_BINS
    out = np.zeros((n, nch * block))
    wcell = np.zeros((size, cells))
    if cells == 1:
        for i in range(size):
            wcell[i, 0] = 1.0
    else:
        for i in range(size):
            if i < half:
                wcell[i, 0] = 1.0
            elif i > half:
                wcell[i, 1] = 1.0
            else:
                wcell[i, 0] = 0.5
                wcell[i, 1] = 0.5
    for k in range(n):
        y0 = centers[k, 0] - half
        x0 = centers[k, 1] - half
        for c in range(nch):
            base = c * block
            for i in range(size):
                iu = i - 1 if i > 0 else 0
                idn = i + 1 if i < size - 1 else size - 1
                for j in range(size):
                    jl = j - 1 if j > 0 else 0
                    jr = j + 1 if j < size - 1 else size - 1
                    gx = img[y0 + i, x0 + jr, c] - img[y0 + i, x0 + jl, c]
                    gy = img[y0 + idn, x0 + j, c] - img[y0 + iu, x0 + j, c]
                    mag = math.sqrt(gx * gx + gy * gy)
                    if mag == 0.0:
                        continue
                    theta = math.degrees(math.atan2(gx, -gy)) % 180.0
                    pos = theta / (180.0 / HOG_BINS) - 0.5
                    fb = math.floor(pos)
                    w1 = pos - fb
                    b0 = int(fb) % HOG_BINS
                    b1 = (b0 + 1) % HOG_BINS
                    for cy in range(cells):
                        wy = wcell[i, cy]
                        if wy == 0.0:
                            continue
                        for cx in range(cells):
                            wx = wcell[j, cx]
                            if wx == 0.0:
                                continue
                            off = base + (cy * cells + cx) * HOG_BINS
                            v = mag * wy * wx
                            out[k, off + b0] += v * (1.0 - w1)
                            out[k, off + b1] += v * w1
            ss = 0.0
            for b in range(block):
                ss += out[k, base + b] * out[k, base + b]
            norm = math.sqrt(ss + HOG_EPS * HOG_EPS)
            for b in range(block):
                out[k, base + b] /= norm
    return out


@nb.njit(**_OPTS)
def tree_apply(kind, p1, p2, thr, left, right, feats):
    n = feats.shape[0]
    out = np.empty(n, dtype=np.int64)
    for s in range(n):
        node = 0
        while kind[node] != 0:
            a = feats[s, p1[node]]
            b = feats[s, p2[node]]
            k = kind[node]
            if k == 1:
                r = a
            elif k == 2:
                r = a + b
            elif k == 3:
                r = a - b
            else:
                r = abs(a - b)
            node = left[node] if r >= thr[node] else right[node]
        out[s] = node
    return out


@nb.njit(**_OPTS)
def split_group_sums(resp, thr_sorted, xc, sqn):
    n, m = xc.shape
    t = thr_sorted.shape[0]
    counts = np.zeros(t + 1, dtype=np.int64)
    sums = np.zeros((t + 1, m))
    sqsums = np.zeros(t + 1)
    for s in range(n):
        g = np.searchsorted(thr_sorted, resp[s], side="right")
        counts[g] += 1
        sqsums[g] += sqn[s]
        for q in range(m):
            sums[g, q] += xc[s, q]
    return counts, sums, sqsums


@nb.njit(**_OPTS)
def splat(img, dx, dy):
    h, w, nch = img.shape
    acc = np.zeros((h, w, nch))
    wsum = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            tx = x + dx[y, x]
            ty = y + dy[y, x]
            fx = math.floor(tx)
            fy = math.floor(ty)
            ax = tx - fx
            ay = ty - fy
            ix = int(fx)
            iy = int(fy)
            for oy in range(2):
                yy = iy + oy
                if yy < 0 or yy >= h:
                    continue
                wy = ay if oy == 1 else 1.0 - ay
                for ox in range(2):
                    xx = ix + ox
                    if xx < 0 or xx >= w:
                        continue
                    wgt = wy * (ax if ox == 1 else 1.0 - ax)
                    if wgt == 0.0:
                        continue
                    wsum[yy, xx] += wgt
                    for c in range(nch):
                        acc[yy, xx, c] += wgt * img[y, x, c]
    return acc, wsum


@nb.njit(**_OPTS)
def accumulate_patches(centers, patches, size, height, width):
    n, p, d = patches.shape
    half = size // 2
    sums = np.zeros((height, width, d))
    counts = np.zeros((height, width), dtype=np.int64)
    for k in range(n):
        y0 = centers[k, 0] - half
        x0 = centers[k, 1] - half
        for i in range(size):
            for j in range(size):
                q = i * size + j
                counts[y0 + i, x0 + j] += 1
                for c in range(d):
                    sums[y0 + i, x0 + j, c] += patches[k, q, c]
    return sums, counts
