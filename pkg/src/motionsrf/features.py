"""Edge-anchored patch sampling and descriptors.

Appearance is described by opponent-colour HOG over a square patch (2x2
cells, 9 orientations, 3 channels = 108 values). Motion is described either
by the raw label patch (for training) or by HOF / MBH histograms.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .config import ForestConfig
from .errors import DataError
from .flowio import as_flow, flow_derivatives
from .imagecore import as_image, canny_edges, to_opponent

HOG_BINS = 9
HOG_CELLS = 2
HOG_DIMS = 3 * HOG_CELLS * HOG_CELLS * HOG_BINS  # 108
HOF_TAU = 0.25
HOF_DIRECTIONS = 8
NORM_EPS = 1e-5


@dataclass(frozen=True)
class PatchGeometry:
    center_x: int
    center_y: int
    size: int

    def __post_init__(self):
        if self.size < 1 or self.size % 2 == 0:
            raise DataError(f"patch size must be odd and positive, got {self.size}")

    @property
    def half(self):
        return self.size // 2

    def fits(self, height, width):
        h = self.half
        return (h <= self.center_y < height - h) and (h <= self.center_x < width - h)

    def window(self):
        h = self.half
        return (slice(self.center_y - h, self.center_y + h + 1),
                slice(self.center_x - h, self.center_x + h + 1))


def centers_array(geoms):
    """(N, 2) int64 array of (row, col) from a list of geometries."""
    if not geoms:
        return np.zeros((0, 2), dtype=np.int64)
    return np.array([(g.center_y, g.center_x) for g in geoms], dtype=np.int64)


def sample_patch_centers(edges, size, stride=1, max_samples=None, seed=0):
    """Edge pixels on a stride grid whose patch lies inside the image.

    When more than ``max_samples`` qualify, a seeded uniform subset is kept.
    The result is sorted by (row, col).
    """
    edges = np.asarray(edges, dtype=bool)
    height, width = edges.shape
    if size % 2 == 0 or size < 1:
        raise DataError(f"patch size must be odd, got {size}")
    if stride < 1:
        raise DataError("stride must be >= 1")
    if size > height or size > width:
        raise DataError(f"patch size {size} larger than image {width}x{height}")
    half = size // 2
    inner = edges[half:height - half, half:width - half]
    ys, xs = np.nonzero(inner[::stride, ::stride])
    ys = ys * stride + half
    xs = xs * stride + half
    if max_samples is not None and ys.size > max_samples:
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(ys.size, size=max_samples, replace=False))
        ys, xs = ys[keep], xs[keep]
    return [PatchGeometry(int(x), int(y), size) for y, x in zip(ys, xs)]


def _check_inside(shape, g):
    if not g.fits(shape[0], shape[1]):
        raise DataError(f"patch {g} does not fit in {shape[1]}x{shape[0]}")


def hog_batch(img_opponent, centers, size):
    """HOG descriptors for many patches at once: (N, 108)."""
    img = as_image(img_opponent)
    if img.ndim != 3:
        raise DataError("HOG expects a 3-channel opponent image")
    centers = np.ascontiguousarray(centers, dtype=np.int64).reshape(-1, 2)
    return kernels.orientation_hist(np.ascontiguousarray(img), centers, size, HOG_CELLS)


def extract_hog(img_opponent, g):
    """108-dim opponent HOG of one patch.

    Per channel: [-1, 0, 1] gradients inside the patch, 9 unsigned
    orientation bins with linear interpolation, 2x2 spatial cells (the
    centre row/column is shared half-and-half), L2 normalization per channel.
    """
    if g.size < 3:
        raise DataError("HOG needs a patch of at least 3x3")
    _check_inside(np.shape(img_opponent), g)
    return hog_batch(img_opponent, [[g.center_y, g.center_x]], g.size)[0]


def extract_motion_patch(field, g):
    """Row-major (size*size, D) crop of a flow or derivative field."""
    field = np.asarray(field)
    if field.ndim != 3:
        raise DataError("motion field must be (H, W, D)")
    _check_inside(field.shape, g)
    rows, cols = g.window()
    return field[rows, cols].reshape(g.size * g.size, field.shape[2]).copy()


def _region(field, region):
    if region is None:
        return field
    if isinstance(region, PatchGeometry):
        _check_inside(field.shape, region)
        rows, cols = region.window()
        return field[rows, cols]
    x0, y0, x1, y1 = region
    if not (0 <= x0 <= x1 <= field.shape[1] and 0 <= y0 <= y1 <= field.shape[0]):
        raise DataError(f"region {region} outside field {field.shape[1]}x{field.shape[0]}")
    return field[y0:y1, x0:x1]


def extract_hof(flow, region=None, tau=HOF_TAU):
    """9-bin histogram of flow: 8 direction bins of 45 degrees plus no-motion.

    Moving pixels add their magnitude to the bin of atan2(v, u) (bin 0 is
    [0, 45) degrees); pixels slower than ``tau`` add 1 to the last bin.
    The result is L1-normalized.
    """
    sub = _region(as_flow(flow), region).astype(np.float64)
    if sub.size == 0:
        raise DataError("empty region")
    u = sub[..., 0].ravel()
    v = sub[..., 1].ravel()
    mag = np.hypot(u, v)
    moving = mag >= tau
    ang = np.arctan2(v, u) % (2.0 * np.pi)
    bins = np.minimum((ang / (2.0 * np.pi / HOF_DIRECTIONS)).astype(np.int64), HOF_DIRECTIONS - 1)
    hist = np.zeros(HOF_DIRECTIONS + 1)
    np.add.at(hist, bins[moving], mag[moving])
    hist[HOF_DIRECTIONS] = np.count_nonzero(~moving)
    return hist / hist.sum()


def _plane_orientation_hist(plane):
    # same taps / orientation convention / binning as the HOG kernel, one cell
    h, w = plane.shape
    rlo = np.maximum(np.arange(h) - 1, 0)
    rhi = np.minimum(np.arange(h) + 1, h - 1)
    clo = np.maximum(np.arange(w) - 1, 0)
    chi = np.minimum(np.arange(w) + 1, w - 1)
    gx = plane[:, chi] - plane[:, clo]
    gy = plane[rhi, :] - plane[rlo, :]
    mag = np.hypot(gx, gy).ravel()
    theta = (np.degrees(np.arctan2(gx, -gy)) % 180.0).ravel()
    pos = theta / (180.0 / HOG_BINS) - 0.5
    fb = np.floor(pos)
    w1 = pos - fb
    b0 = fb.astype(np.int64) % HOG_BINS
    hist = np.bincount(b0, weights=mag * (1.0 - w1), minlength=HOG_BINS)
    hist += np.bincount((b0 + 1) % HOG_BINS, weights=mag * w1, minlength=HOG_BINS)
    return hist / np.sqrt(hist @ hist + NORM_EPS * NORM_EPS)


def extract_mbh(flow, region=None):
    """Motion boundary histogram: orientation histograms of grad(u) and grad(v).

    18 values; each 9-bin half is L2-normalized separately.
    """
    sub = _region(as_flow(flow), region).astype(np.float64)
    if sub.size == 0:
        raise DataError("empty region")
    return np.concatenate([_plane_orientation_hist(sub[..., 0]),
                           _plane_orientation_hist(sub[..., 1])])


@dataclass(frozen=True)
class TrainingSample:
    descriptor: np.ndarray
    motion: np.ndarray
    geometry: PatchGeometry
    source_id: int


@dataclass
class TrainingSet:
    """Columnar store of appearance/motion pairs.

    ``descriptors`` (N, 108), ``motion`` (N, P, D), ``centers`` (N, 2) as
    (row, col), ``source_ids`` (N,).
    """
    descriptors: np.ndarray
    motion: np.ndarray
    centers: np.ndarray
    source_ids: np.ndarray
    patch_size: int

    def __len__(self):
        return self.descriptors.shape[0]

    def __getitem__(self, i):
        cy, cx = self.centers[i]
        return TrainingSample(self.descriptors[i], self.motion[i],
                              PatchGeometry(int(cx), int(cy), self.patch_size),
                              int(self.source_ids[i]))

    @property
    def label_dims(self):
        return self.motion.shape[2]

    def subset(self, idx):
        return TrainingSet(self.descriptors[idx], self.motion[idx], self.centers[idx],
                           self.source_ids[idx], self.patch_size)

    @classmethod
    def empty(cls, patch_size, label_dims):
        p = patch_size * patch_size
        return cls(np.zeros((0, HOG_DIMS)), np.zeros((0, p, label_dims)),
                   np.zeros((0, 2), dtype=np.int64), np.zeros(0, dtype=np.int64), patch_size)

    @classmethod
    def concat(cls, parts):
        parts = list(parts)
        if not parts:
            raise DataError("nothing to concatenate")
        if len({(p.patch_size,) + p.motion.shape[1:] for p in parts}) != 1:
            raise DataError("cannot concatenate sets with different patch geometry")
        return cls(np.concatenate([p.descriptors for p in parts]),
                   np.concatenate([p.motion for p in parts]),
                   np.concatenate([p.centers for p in parts]),
                   np.concatenate([p.source_ids for p in parts]),
                   parts[0].patch_size)


def label_field(flow, label_dims):
    flow = as_flow(flow)
    if label_dims == 2:
        return flow.astype(np.float64)
    return flow_derivatives(flow)


def pair_samples(image, flow, config, source_id=0, seed=None):
    """Training samples of one (frame, flow) pair."""
    image = as_image(image)
    flow = as_flow(flow)
    if image.shape[:2] != flow.shape[:2]:
        raise DataError(f"frame {source_id}: image {image.shape[:2]} vs flow {flow.shape[:2]}")
    if image.ndim != 3:
        image = np.repeat(image[:, :, None], 3, axis=2)
    size = config.patch_size
    edges = canny_edges(image, config.canny_low, config.canny_high, config.canny_sigma)
    seed = (config.seed, source_id) if seed is None else seed
    geoms = sample_patch_centers(edges, size, config.stride, config.max_samples, seed)
    if not geoms:
        return TrainingSet.empty(size, config.label_dims)
    centers = centers_array(geoms)
    desc = hog_batch(to_opponent(image), centers, size)
    labels = label_field(flow, config.label_dims)
    half = size // 2
    di, dj = np.divmod(np.arange(size * size), size)
    rows = centers[:, 0, None] - half + di[None, :]
    cols = centers[:, 1, None] - half + dj[None, :]
    motion = labels[rows, cols]
    ids = np.full(len(geoms), source_id, dtype=np.int64)
    return TrainingSet(desc, motion, centers, ids, size)


def build_training_set(frame_pairs, config=None):
    """Pool edge-anchored samples over (image, flow) pairs.

    Sample order is (source index, row, col). Raises if no frame has edges.
    """
    config = config or ForestConfig()
    frame_pairs = list(frame_pairs)
    if not frame_pairs:
        raise DataError("no frame pairs")
    if not config.patch_size:
        h, w = np.shape(frame_pairs[0][0])[:2]
        config = config.with_patch_size_for(w, h)
    parts = [pair_samples(img, flow, config, source_id=i) for i, (img, flow) in enumerate(frame_pairs)]
    out = TrainingSet.concat(parts)
    if len(out) == 0:
        raise DataError("no edge samples found in any frame")
    return out
