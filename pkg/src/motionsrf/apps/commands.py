"""File-level operations behind the CLI subcommands.

Each ``cmd_*`` function takes paths and plain values, writes its outputs and
returns an in-memory result, so tests can call them without a subprocess.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import evalmetrics
from ..errors import DataError
from ..features import HOF_TAU, PatchGeometry, extract_hof, extract_mbh, hog_batch
from ..flowio import as_flow, flow_to_color, read_flo, write_flo
from ..imagecore import as_image, blend, canny_edges, load_image, resize, save_image, to_opponent, warp_image
from ..srf import load_model, merge_forests, predict_flow_image, save_model, train_forest
from .manifest import load_manifest, load_pair
from .synth import gen_synthetic_corpus

logger = logging.getLogger(__name__)

FLO_MAGIC = b"PIEH"  # 202021.25 as little-endian float32
POOL_TAU = HOF_TAU
N_POOLS = 9
MAX_SIDE = 300

POOL_COLORS = np.array([
    [0.5, 0.5, 0.5],
    [0.9, 0.1, 0.1], [1.0, 0.6, 0.6],
    [0.1, 0.7, 0.1], [0.6, 1.0, 0.6],
    [0.1, 0.2, 0.9], [0.6, 0.7, 1.0],
    [0.9, 0.7, 0.0], [1.0, 0.95, 0.5],
])


def _echo(out, text):
    if out is not None:
        out(text)


def _class_path(out_path, label):
    p = Path(out_path)
    safe = "".join(c if c.isalnum() or c in "-_" else "_" for c in str(label))
    return p.with_name(f"{p.stem}_{safe}{p.suffix}")


def cmd_train(manifest_path, config, out_path, trace_path=None, out=print):
    """Train one forest per class label (or a single one) and save it.

    Returns a list of ``(label, path, forest)``.
    """
    manifest = load_manifest(manifest_path)
    if not manifest.entries:
        raise DataError("manifest lists no frames")
    labels = manifest.labels()
    results = []
    trace_lines = []
    for label in labels:
        entries = manifest.by_label(label)
        corpus = [load_pair(e) for e in entries]
        traces = []
        forest = train_forest(corpus, config, traces=traces)
        path = Path(out_path) if label is None else _class_path(out_path, label)
        save_model(forest, path)
        name = label or "all"
        _echo(out, f"class={name} pairs={len(corpus)} patch_size={forest.patch_size} -> {path}")
        for k, (tree, trace) in enumerate(zip(forest.trees, traces)):
            reasons = [ev[3] for ev in trace.events if ev[0] == "leaf"]
            _echo(out, f"  tree {k}: samples={forest.sample_counts[k]} leaves={tree.n_leaves} "
                       f"nodes={tree.n_nodes} budget_leaves={reasons.count('budget')} "
                       f"variance_leaves={reasons.count('variance')} "
                       f"nosplit_leaves={reasons.count('nosplit')}")
            trace_lines.append(f"# class={name} tree={k}")
            trace_lines.extend(trace.lines())
        results.append((label, path, forest))
    if trace_path is not None:
        Path(trace_path).write_text("\n".join(trace_lines) + "\n", encoding="utf-8")
    return results


def load_forest(model_paths):
    paths = [model_paths] if isinstance(model_paths, (str, Path)) else list(model_paths)
    if not paths:
        raise DataError("no model given")
    forests = [load_model(p) for p in paths]
    forest = forests[0] if len(forests) == 1 else merge_forests(forests)
    if forest.label_dims != 2:
        raise DataError("model predicts flow derivatives; this command needs a flow model")
    return forest


def _with_canny(forest, canny):
    """Override the model's edge parameters with ``{"sigma"|"low"|"high": value}``."""
    if canny:
        forest.config = forest.config.replace(**{"canny_" + k: v for k, v in canny.items()})
    return forest


def cmd_predict(model_paths, image_path, out_flo, out_png=None, warp_steps=(), warp_prefix=None,
                canny=None, out=print):
    """Predict dense motion for one still image. Returns ``(field, coverage)``."""
    forest = _with_canny(load_forest(model_paths), canny)
    img = load_image(image_path)
    flow, coverage = predict_flow_image(forest, img)
    if not coverage.any():
        logger.warning("%s: no edge patch covered the image; writing zero flow", image_path)
    write_flo(out_flo, flow)
    _echo(out, f"{out_flo}: {img.shape[1]}x{img.shape[0]} covered={int(coverage.sum())}")
    if out_png is not None:
        save_image(out_png, flow_to_color(flow))
    if warp_steps:
        prefix = Path(warp_prefix) if warp_prefix else Path(out_flo).with_suffix("")
        for step in warp_steps:
            path = prefix.with_name(f"{prefix.name}_warp_{step:g}.png")
            save_image(path, warp_image(img, flow, step))
            _echo(out, f"  warp step {step:g} -> {path}")
    return flow, coverage


def _is_flo(path):
    with open(path, "rb") as fh:
        return fh.read(4) == FLO_MAGIC


def edge_mask(img, canny=None):
    return canny_edges(img, **(canny or {}))


def cmd_eval(pred_path, ref_flo, image_path, label="", canny=None, as_json=False, out=print):
    """Score a prediction (.flo, or a model run on the image) at the image's edges."""
    img = load_image(image_path)
    ref = read_flo(ref_flo)
    if ref.shape[:2] != img.shape[:2]:
        raise DataError(f"reference flow {ref.shape[:2]} vs image {img.shape[:2]}")
    if _is_flo(pred_path):
        pred = read_flo(pred_path)
    else:
        forest = _with_canny(load_forest(pred_path), canny)
        pred, _ = predict_flow_image(forest, img)
    if pred.shape[:2] != ref.shape[:2]:
        raise DataError(f"prediction {pred.shape[:2]} vs reference {ref.shape[:2]}")
    mask = edge_mask(img, canny)
    report = evalmetrics.score(pred, ref, mask, label)
    if as_json:
        _echo(out, report.to_json())
    else:
        _echo(out, evalmetrics.TABLE_HEADER)
        _echo(out, report.row())
    return report


@dataclass
class AnomalyReport:
    epe: list
    mean: float
    std: float
    flagged: list
    baseline: list = field(default_factory=list)

    def to_json(self):
        def clean(v):
            return None if isinstance(v, float) and math.isnan(v) else v
        d = asdict(self)
        d["epe"] = [clean(v) for v in self.epe]
        d["baseline"] = [clean(v) for v in self.baseline]
        return json.dumps(d, sort_keys=True)

    def lines(self):
        out = ["frame\tepe\tprev_epe\tflag"]
        flagged = set(self.flagged)
        for i, e in enumerate(self.epe):
            b = self.baseline[i] if i < len(self.baseline) else math.nan
            out.append(f"{i}\t{e:.6f}\t{b:.6f}\t{'*' if i in flagged else ''}")
        out.append(f"mean={self.mean:.6f} std={self.std:.6f} threshold={self.mean + self.std:.6f} "
                   f"flagged={','.join(str(i) for i in self.flagged) or '-'}")
        return out


def flag_anomalies(series):
    """(mean, std, flagged) with flagged = {i : e_i > mean + std}; NaN frames are skipped."""
    e = np.asarray(series, dtype=np.float64)
    ok = np.isfinite(e)
    if not ok.any():
        raise DataError("no frame has an evaluable edge mask")
    mean = float(np.mean(e[ok]))
    std = float(np.std(e[ok]))
    flagged = [int(i) for i in np.nonzero(ok & (e > mean + std))[0]]
    return mean, std, flagged


def fit_max_side(img, flow, max_side=MAX_SIDE):
    """Downscale image and flow so the larger side is at most ``max_side``."""
    h, w = img.shape[:2]
    scale = max_side / max(h, w)
    if scale >= 1.0:
        return img, flow
    shape = (max(1, round(h * scale)), max(1, round(w * scale)))
    sy, sx = shape[0] / h, shape[1] / w
    small = np.clip(resize(img, shape), 0.0, 1.0)
    f = resize(flow, shape)
    f[..., 0] *= sx
    f[..., 1] *= sy
    return small, f


def _masked_epe_map(pred, ref):
    return np.hypot(pred[..., 0] - ref[..., 0], pred[..., 1] - ref[..., 1])


def cmd_detect_unexpected(model_paths, manifest_path, heatmap_dir=None, max_side=MAX_SIDE,
                          canny=None, as_json=False, out=print):
    """Per-frame edge EPE between predicted and measured flow; flag outliers."""
    manifest = load_manifest(manifest_path)
    if len(manifest.entries) < 2:
        raise DataError("need at least 2 frames")
    forest = _with_canny(load_forest(model_paths), canny)
    series, baseline, maps = [], [], []
    prev = None
    for entry in manifest.entries:
        img, flow = load_pair(entry)
        img, flow = fit_max_side(img, np.asarray(flow, dtype=np.float64), max_side)
        pred, _ = predict_flow_image(forest, img)
        mask = edge_mask(img, canny)
        if mask.any():
            series.append(evalmetrics.epe_at_mask(pred, flow, mask))
            if prev is not None and prev.shape == flow.shape:
                baseline.append(evalmetrics.epe_at_mask(prev, flow, mask))
            else:
                baseline.append(math.nan)
        else:
            series.append(math.nan)
            baseline.append(math.nan)
        if heatmap_dir is not None:
            maps.append(np.where(mask, _masked_epe_map(pred, flow), 0.0))
        prev = flow
    mean, std, flagged = flag_anomalies(series)
    report = AnomalyReport(series, mean, std, flagged, baseline)
    if heatmap_dir is not None:
        d = Path(heatmap_dir)
        d.mkdir(parents=True, exist_ok=True)
        top = max(float(m.max()) for m in maps) or 1.0
        for i, m in enumerate(maps):
            save_image(d / f"epe_{i:04d}.png", _heat(m / top))
    if as_json:
        _echo(out, report.to_json())
    else:
        for line in report.lines():
            _echo(out, line)
    return report


def _heat(x):
    # black -> red -> yellow -> white
    x = np.clip(x, 0.0, 1.0)
    return np.stack([np.clip(3 * x, 0, 1), np.clip(3 * x - 1, 0, 1), np.clip(3 * x - 2, 0, 1)], axis=-1)


@dataclass
class PoolAssignment:
    pool_ids: np.ndarray   # (N,) pool of each grid location
    centers: np.ndarray    # (N, 2) (row, col)
    n_pools: int = N_POOLS
    band_split: float = 0.0

    def histogram(self):
        return np.bincount(self.pool_ids, minlength=self.n_pools)


def dense_grid(height, width, size, stride):
    """Grid locations (row, col) whose ``size`` patch fits, every ``stride`` px."""
    if stride < 1:
        raise DataError("grid stride must be >= 1")
    half = size // 2
    rows = np.arange(half, height - half, stride)
    cols = np.arange(half, width - half, stride)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    return np.stack([rr.ravel(), cc.ravel()], axis=1).astype(np.int64)


def assign_pools(vectors, tau=POOL_TAU, band_split=None):
    """Pool per flow vector: 0 below ``tau``, else 1 + 2*quadrant + band.

    Quadrants follow the flow angle in [0, 360) degrees in 90 degree steps;
    band is 1 when the magnitude is at or above ``band_split`` (default: the
    median magnitude of the non-zero-pool vectors).
    """
    v = np.asarray(vectors, dtype=np.float64).reshape(-1, 2)
    mag = np.hypot(v[:, 0], v[:, 1])
    moving = mag >= tau
    if band_split is None:
        band_split = float(np.median(mag[moving])) if moving.any() else 0.0
    ang = np.degrees(np.arctan2(v[:, 1], v[:, 0])) % 360.0
    quad = np.minimum((ang // 90.0).astype(np.int64), 3)
    band = (mag >= band_split).astype(np.int64)
    pools = np.where(moving, 1 + 2 * quad + band, 0)
    return pools, band_split


def pool_descriptors(img, flow, centers, pools, size, n_pools=N_POOLS):
    """Mean HOG, HOF and MBH per pool (zeros for empty pools)."""
    hog = hog_batch(to_opponent(img), centers, size)
    hof = np.array([extract_hof(flow, PatchGeometry(int(c), int(r), size)) for r, c in centers])
    mbh = np.array([extract_mbh(flow, PatchGeometry(int(c), int(r), size)) for r, c in centers])
    counts = np.bincount(pools, minlength=n_pools)
    out = {}
    for name, d in (("hog", hog), ("hof", hof), ("mbh", mbh)):
        acc = np.zeros((n_pools, d.shape[1]))
        np.add.at(acc, pools, d)
        nz = counts > 0
        acc[nz] /= counts[nz][:, None]
        out[name] = acc
    out["counts"] = counts
    return out


def pool_image(img, flow, size, stride, tau=POOL_TAU, band_split=None):
    """Assign the dense grid of one image and aggregate its descriptors."""
    img = as_image(img)
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    flow = as_flow(flow).astype(np.float64)
    h, w = img.shape[:2]
    centers = dense_grid(h, w, size, stride)
    if centers.shape[0] == 0:
        raise DataError(f"no grid location fits a {size}px patch in a {w}x{h} image")
    pools, split = assign_pools(flow[centers[:, 0], centers[:, 1]], tau, band_split)
    assignment = PoolAssignment(pools, centers, N_POOLS, split)
    return assignment, pool_descriptors(img, flow, centers, pools, size)


def render_pools(img, assignment, stride, alpha=0.6):
    img = as_image(img)
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    overlay = img.copy()
    h, w = img.shape[:2]
    r = max(stride // 2, 0)
    for (y, x), p in zip(assignment.centers, assignment.pool_ids):
        overlay[max(0, y - r):min(h, y + r + 1), max(0, x - r):min(w, x + r + 1)] = POOL_COLORS[p]
    return blend(img, overlay, alpha)


def cmd_pool(model_paths, image_path, out_npz, stride=4, out_png=None, tau=POOL_TAU,
             band_split=None, canny=None, out=print):
    forest = _with_canny(load_forest(model_paths), canny)
    img = load_image(image_path)
    flow, _ = predict_flow_image(forest, img)
    assignment, desc = pool_image(img, flow, forest.patch_size, stride, tau, band_split)
    np.savez(out_npz, pool_ids=assignment.pool_ids, centers=assignment.centers,
             n_pools=assignment.n_pools, band_split=assignment.band_split, tau=tau, **desc)
    hist = assignment.histogram()
    _echo(out, f"{len(assignment.pool_ids)} grid locations, band split {assignment.band_split:.4g} px")
    _echo(out, "pool counts: " + " ".join(str(int(c)) for c in hist))
    if out_png is not None:
        save_image(out_png, render_pools(img, assignment, stride))
    return assignment, desc


def cmd_synth(rules, out_dir, seed=0, n_pairs=10, width=64, height=64, per_class=False, out=print):
    manifest = gen_synthetic_corpus(rules, out_dir, seed, n_pairs, width, height, per_class)
    _echo(out, f"wrote {len(manifest)} pairs to {out_dir}")
    return manifest


def cmd_warp(image_path, flo_path, out_path, step=1.0, out=print):
    img = load_image(image_path)
    flow = read_flo(flo_path)
    if flow.shape[:2] != img.shape[:2]:
        raise DataError(f"flow {flow.shape[:2]} vs image {img.shape[:2]}")
    warped = warp_image(img, flow, step)
    save_image(out_path, warped)
    _echo(out, f"{out_path}: step {step:g}")
    return warped


def cmd_flow2png(flo_path, out_path, max_mag=None, out=print):
    flow = read_flo(flo_path)
    rgb = flow_to_color(flow, max_mag)
    save_image(out_path, rgb)
    _echo(out, f"{out_path}: {flow.shape[1]}x{flow.shape[0]}")
    return rgb


__all__ = [
    "AnomalyReport", "PoolAssignment", "assign_pools", "cmd_detect_unexpected", "cmd_eval",
    "cmd_flow2png", "cmd_pool", "cmd_predict", "cmd_synth", "cmd_train", "cmd_warp",
    "dense_grid", "edge_mask", "fit_max_side", "flag_anomalies", "load_forest", "pool_image",
    "render_pools",
]
