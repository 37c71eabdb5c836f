"""Affine camera-motion estimation between two frames and flow correction.

Interest points are Harris corners, matched by zero-normalized
cross-correlation (ZNCC) of small windows; RANSAC over 3-point affine fits
rejects inconsistent matches.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .errors import DataError
from .flowio import as_flow
from .imagecore import to_gray, warp_image

HARRIS_K = 0.04
HARRIS_SIGMA = 1.5
NMS_RADIUS = 5
MATCH_WINDOW = 9
MATCH_RADIUS = 15
MIN_ZNCC = 0.8


@dataclass(frozen=True)
class AffineModel:
    """(x, y) -> (a11 x + a12 y + tx, a21 x + a22 y + ty)."""
    a11: float = 1.0
    a12: float = 0.0
    a21: float = 0.0
    a22: float = 1.0
    tx: float = 0.0
    ty: float = 0.0

    def __post_init__(self):
        vals = np.array([self.a11, self.a12, self.a21, self.a22, self.tx, self.ty])
        if not np.all(np.isfinite(vals)):
            raise DataError("affine parameters must be finite")
        if abs(self.det) <= 1e-6:
            raise DataError(f"affine model is singular (det={self.det:g})")

    @classmethod
    def translation(cls, tx, ty):
        return cls(tx=float(tx), ty=float(ty))

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=np.float64)
        return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1], m[0, 2], m[1, 2])

    @property
    def det(self):
        return self.a11 * self.a22 - self.a12 * self.a21

    @property
    def matrix(self):
        return np.array([[self.a11, self.a12, self.tx],
                         [self.a21, self.a22, self.ty],
                         [0.0, 0.0, 1.0]])

    def apply(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        return (self.a11 * x + self.a12 * y + self.tx,
                self.a21 * x + self.a22 * y + self.ty)

    def compose(self, first):
        """The model applying ``first`` and then ``self``."""
        return AffineModel.from_matrix(self.matrix @ first.matrix)

    def inverse(self):
        return AffineModel.from_matrix(np.linalg.inv(self.matrix))


@dataclass(frozen=True)
class PointMatch:
    x1: float
    y1: float
    x2: float
    y2: float
    score: float


def harris_response(gray, k=HARRIS_K, sigma=HARRIS_SIGMA):
    ix = ndimage.sobel(gray, axis=1, mode="nearest") / 8.0
    iy = ndimage.sobel(gray, axis=0, mode="nearest") / 8.0
    sxx = ndimage.gaussian_filter(ix * ix, sigma, mode="nearest")
    syy = ndimage.gaussian_filter(iy * iy, sigma, mode="nearest")
    sxy = ndimage.gaussian_filter(ix * iy, sigma, mode="nearest")
    return sxx * syy - sxy * sxy - k * (sxx + syy) ** 2


def detect_corners(img, max_corners=500, radius=NMS_RADIUS, rel_threshold=0.01):
    """Harris corners as a list of (x, y), strongest first.

    Candidates are positive local maxima above ``rel_threshold`` times the
    strongest response; greedy suppression keeps no two corners within
    ``radius`` pixels.
    """
    gray = to_gray(img)
    if min(gray.shape) < 3:
        raise DataError("image too small for corner detection")
    resp = harris_response(gray)
    peak = resp.max()
    if not peak > 0:
        return []
    yy, xx = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    disk = (yy * yy + xx * xx) <= radius * radius
    local = ndimage.maximum_filter(resp, footprint=disk, mode="nearest")
    cand = (resp == local) & (resp > rel_threshold * peak)
    ys, xs = np.nonzero(cand)
    order = np.lexsort((xs, ys, -resp[ys, xs]))
    kept = []
    r2 = radius * radius
    for i in order:
        y, x = int(ys[i]), int(xs[i])
        if all((x - kx) ** 2 + (y - ky) ** 2 > r2 for kx, ky in kept):
            kept.append((x, y))
            if len(kept) >= max_corners:
                break
    return kept


def match_points(img_a, img_b, corners_a, window=MATCH_WINDOW, radius=MATCH_RADIUS,
                 min_score=MIN_ZNCC):
    """Match corners of ``img_a`` into ``img_b`` by best ZNCC within ``radius``.

    Ties in score go to the smaller displacement. Corners whose window is
    constant or leaves the frame produce no match.
    """
    a = to_gray(img_a)
    b = to_gray(img_b)
    if a.shape != b.shape:
        raise DataError("frames must have the same size")
    h, w = a.shape
    half = window // 2
    if h < window or w < window:
        return []
    wins_b = sliding_window_view(b, (window, window))  # top-left indexed
    mean_b = wins_b.mean(axis=(2, 3))
    std_b = wins_b.std(axis=(2, 3))
    out = []
    for x, y in corners_a:
        x, y = int(round(x)), int(round(y))
        if not (half <= x < w - half and half <= y < h - half):
            continue
        pa = a[y - half:y + half + 1, x - half:x + half + 1]
        sa = pa.std()
        if sa < 1e-9:
            continue
        za = (pa - pa.mean()) / sa
        y0, y1 = max(half, y - radius), min(h - half - 1, y + radius)
        x0, x1 = max(half, x - radius), min(w - half - 1, x + radius)
        sub = wins_b[y0 - half:y1 - half + 1, x0 - half:x1 - half + 1]
        mb = mean_b[y0 - half:y1 - half + 1, x0 - half:x1 - half + 1]
        sb = std_b[y0 - half:y1 - half + 1, x0 - half:x1 - half + 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            zncc = np.einsum("ijkl,kl->ij", sub, za) / (window * window) - mb * za.mean()
            zncc = zncc / sb
        zncc = np.where(sb > 1e-9, zncc, -np.inf)
        best = zncc.max()
        if not best >= min_score:
            continue
        ty, tx = np.nonzero(zncc >= best - 1e-12)
        dy = ty + y0 - y
        dx = tx + x0 - x
        j = np.lexsort((dx, dy, dx * dx + dy * dy))[0]
        out.append(PointMatch(float(x), float(y), float(x + dx[j]), float(y + dy[j]),
                              float(min(best, 1.0))))
    return out


def _as_match_array(matches):
    if isinstance(matches, np.ndarray):
        arr = np.asarray(matches, dtype=np.float64)
        return arr[:, :4]
    return np.array([[m.x1, m.y1, m.x2, m.y2] for m in matches], dtype=np.float64).reshape(-1, 4)


def _fit_affine(src, dst):
    design = np.column_stack([src, np.ones(len(src))])
    sol, *_ = np.linalg.lstsq(design, dst, rcond=None)
    # sol is (3, 2): columns give (a11, a12, tx) and (a21, a22, ty)
    return np.array([[sol[0, 0], sol[1, 0], sol[2, 0]],
                     [sol[0, 1], sol[1, 1], sol[2, 1]],
                     [0.0, 0.0, 1.0]])


def _residuals(m, src, dst):
    pred = src @ m[:2, :2].T + m[:2, 2]
    return np.hypot(pred[:, 0] - dst[:, 0], pred[:, 1] - dst[:, 1])


def ransac_affine(matches, iters=500, tol=2.0, seed=0, max_resample=100):
    """Robust affine fit. Returns ``(AffineModel, inlier_mask)``.

    Each iteration fits three random matches exactly (collinear triples are
    redrawn); the hypothesis with most inliers (error <= ``tol``, earliest
    wins ties) is refit by least squares on its inliers.
    """
    pts = _as_match_array(matches)
    n = len(pts)
    if n < 3:
        raise DataError(f"need at least 3 matches, got {n}")
    src, dst = pts[:, :2], pts[:, 2:]
    rng = np.random.default_rng(seed)
    best_mask, best_count = None, -1
    for _ in range(iters):
        for _ in range(max_resample):
            pick = rng.choice(n, size=3, replace=False)
            p = src[pick]
            area = (p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[1, 1] - p[0, 1]) * (p[2, 0] - p[0, 0])
            if abs(area) > 1e-6:
                break
        else:
            continue
        m = _fit_affine(src[pick], dst[pick])
        mask = _residuals(m, src, dst) <= tol
        count = int(mask.sum())
        if count > best_count:
            best_count, best_mask = count, mask
    if best_mask is None or best_count < 3:
        raise DataError("RANSAC found no consistent affine model")
    mask = best_mask
    for _ in range(2):
        m = _fit_affine(src[mask], dst[mask])
        new_mask = _residuals(m, src, dst) <= tol
        if new_mask.sum() < 3 or np.array_equal(new_mask, mask):
            break
        mask = new_mask
    return AffineModel.from_matrix(m), mask


def affine_to_flow(model, width, height):
    """Displacement field induced by ``model`` on a width x height grid."""
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    u = (model.a11 - 1.0) * xs + model.a12 * ys + model.tx
    v = model.a21 * xs + (model.a22 - 1.0) * ys + model.ty
    return np.stack([u, v], axis=-1)


def correct_flow(measured, model):
    """Measured flow with the camera-induced affine flow removed."""
    measured = as_flow(measured).astype(np.float64)
    h, w = measured.shape[:2]
    return measured - affine_to_flow(model, w, h)


def estimate_camera_motion(img_a, img_b, max_corners=500, iters=500, tol=2.0, seed=0):
    corners = detect_corners(img_a, max_corners)
    matches = match_points(img_a, img_b, corners)
    return ransac_affine(matches, iters, tol, seed)


def compensate_frame(img_b, model):
    """Warp the second frame back by the inverse camera motion."""
    h, w = np.shape(img_b)[:2]
    return warp_image(img_b, affine_to_flow(model.inverse(), w, h), 1.0)
