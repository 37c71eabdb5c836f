"""Scores for predicted flow against reference flow on a pixel mask."""

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DataError

COS_EPS = 1e-6


@dataclass(frozen=True)
class ScoreReport:
    epe: float
    zero_epe: float
    direction_pct: float
    orientation_pct: float
    n_points: int       # pixels that entered the cosine scores
    n_mask: int = 0     # pixels that entered the EPE scores
    label: str = ""

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def row(self):
        name = self.label or "-"
        return (f"{name:<12s} {self.epe:8.3f} px {self.zero_epe:8.3f} px "
                f"{self.direction_pct:8.2f} % {self.orientation_pct:8.2f} %")


TABLE_HEADER = f"{'':<12s} {'Edge EPE':>11s} {'0-Edge EPE':>11s} {'Edge dir.':>10s} {'Edge orient.':>10s}"


def _prepare(pred, ref, mask):
    pred = np.asarray(pred, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if pred.shape != ref.shape or pred.ndim != 3 or pred.shape[2] != 2:
        raise DataError(f"flow shapes differ or are not (H, W, 2): {pred.shape} vs {ref.shape}")
    if mask.shape != pred.shape[:2]:
        raise DataError(f"mask shape {mask.shape} does not match flow {pred.shape[:2]}")
    if not mask.any():
        raise DataError("empty evaluation mask")
    return pred[mask], ref[mask]


def epe_at_mask(pred, ref, mask):
    """Mean end-point error over the masked pixels."""
    p, r = _prepare(pred, ref, mask)
    return float(np.mean(np.hypot(p[:, 0] - r[:, 0], p[:, 1] - r[:, 1])))


def zero_baseline_epe(ref, mask):
    """EPE of the all-zero prediction, i.e. mean masked flow magnitude."""
    return epe_at_mask(np.zeros_like(np.asarray(ref, dtype=np.float64)), ref, mask)


def _cosines(pred, ref, mask):
    p, r = _prepare(pred, ref, mask)
    pp = p[:, 0] * p[:, 0] + p[:, 1] * p[:, 1]
    rr = r[:, 0] * r[:, 0] + r[:, 1] * r[:, 1]
    ok = (np.sqrt(pp) >= COS_EPS) & (np.sqrt(rr) >= COS_EPS)
    if not ok.any():
        raise DataError("no pixel with both vectors above the norm floor")
    dot = p[ok, 0] * r[ok, 0] + p[ok, 1] * r[ok, 1]
    # one square root of the product keeps cos(v, v) == 1 exactly
    return np.clip(dot / np.sqrt(pp[ok] * rr[ok]), -1.0, 1.0)


def direction_score(pred, ref, mask):
    """100 x mean signed cosine between predicted and reference vectors."""
    return float(100.0 * np.mean(_cosines(pred, ref, mask)))


def orientation_score(pred, ref, mask):
    """100 x mean absolute cosine (angle on the half circle)."""
    return float(100.0 * np.mean(np.abs(_cosines(pred, ref, mask))))


def score(pred, ref, mask, label=""):
    """All four scores; cosine scores are NaN when no pixel qualifies."""
    epe = epe_at_mask(pred, ref, mask)
    zero = zero_baseline_epe(ref, mask)
    try:
        cos = _cosines(pred, ref, mask)
        direction = float(100.0 * np.mean(cos))
        orientation = float(100.0 * np.mean(np.abs(cos)))
        n_points = int(cos.size)
    except DataError:
        direction = orientation = math.nan
        n_points = 0
    return ScoreReport(epe, zero, direction, orientation, n_points,
                       int(np.count_nonzero(mask)), label)


def aggregate(reports, weights=None, label="Avg."):
    """Average reports; unweighted by default, ``weights="n_points"`` to weight by points."""
    reports = list(reports)
    if not reports:
        raise DataError("nothing to aggregate")
    if weights is None:
        w = np.ones(len(reports))
    elif isinstance(weights, str):
        w = np.array([getattr(r, weights) for r in reports], dtype=np.float64)
    else:
        w = np.asarray(weights, dtype=np.float64)
    if w.shape != (len(reports),) or np.any(w < 0) or w.sum() <= 0:
        raise DataError("weights must be non-negative with a positive sum")
    w = w / w.sum()

    def avg(name):
        return float(np.dot(w, [getattr(r, name) for r in reports]))

    return ScoreReport(avg("epe"), avg("zero_epe"), avg("direction_pct"), avg("orientation_pct"),
                       int(sum(r.n_points for r in reports)), int(sum(r.n_mask for r in reports)),
                       label)
