"""Split tests and the patch-variance split objective."""

import enum
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import DataError


# objectives this close (relative) count as ties, so the same partition
# reached through different candidates never wins on rounding noise
TIE_REL = 1e-12


class SplitType(enum.IntEnum):
    SINGLE = 1      # F[p1] >= t
    SUM = 2         # F[p1] + F[p2] >= t
    DIFF = 3        # F[p1] - F[p2] >= t
    ABS_DIFF = 4    # |F[p1] - F[p2]| >= t


@dataclass(frozen=True)
class SplitRecord:
    kind: SplitType
    p1: int
    p2: int
    threshold: float


@dataclass(frozen=True)
class SplitResult:
    split: SplitRecord
    objective: float
    left: np.ndarray   # positions (within the node) routed left, i.e. response true
    right: np.ndarray


def split_values(kind, p1, p2, feats):
    """Response values of a split family on a (N, F) descriptor matrix."""
    a = feats[..., p1]
    b = feats[..., p2]
    if kind == SplitType.SINGLE:
        return a
    if kind == SplitType.SUM:
        return a + b
    if kind == SplitType.DIFF:
        return a - b
    if kind == SplitType.ABS_DIFF:
        return np.abs(a - b)
    raise ValueError(f"unknown split type {kind!r}")


def split_response(split, f):
    """True routes the descriptor to the left child."""
    f = np.asarray(f)
    n = f.shape[-1]
    if not (0 <= split.p1 < n and 0 <= split.p2 < n):
        raise DataError(f"split indices ({split.p1}, {split.p2}) out of range for {n} features")
    return bool(split_values(split.kind, split.p1, split.p2, f) >= split.threshold)


def node_variance(patches):
    """Pixel-wise patch variance of a set of (P, D) motion patches.

    Sum over samples of the per-pixel squared distance to the mean patch,
    averaged over pixels and divided by (|S| - 1). Zero for fewer than two
    patches.
    """
    x = np.asarray(patches, dtype=np.float64)
    if x.ndim != 3:
        raise DataError(f"expected (N, P, D) patches, got shape {x.shape}")
    n, p = x.shape[:2]
    if n < 2:
        return 0.0
    dev = x - x.mean(axis=0)
    return float(np.einsum("ipd,ipd->", dev, dev) / (p * (n - 1)))


def draw_candidate(rng, n_features, feats, threshold_iters):
    """One random split family and its thresholds.

    Draw order (relied on for replay): split type, the two feature indices,
    then ``threshold_iters`` thresholds uniform in the observed response
    range.
    """
    kind = SplitType(int(rng.integers(1, 5)))
    p1, p2 = (int(v) for v in rng.choice(n_features, size=2, replace=False))
    resp = split_values(kind, p1, p2, feats)
    lo, hi = float(resp.min()), float(resp.max())
    thresholds = rng.uniform(lo, hi, size=threshold_iters)
    return kind, p1, p2, resp, thresholds


def _objectives(resp, thresholds, xc, sqn, n_pixels, min_child):
    """Weighted child variance for each threshold; inf where a child is too small."""
    n = resp.shape[0]
    order = np.argsort(thresholds, kind="stable")
    ts = np.ascontiguousarray(thresholds[order])
    counts, sums, sqsums = kernels.split_group_sums(np.ascontiguousarray(resp), ts, xc, sqn)
    # group g holds samples with exactly g sorted thresholds <= response;
    # left of sorted threshold k is the union of groups k+1..T
    left_n = np.cumsum(counts[::-1])[::-1][1:]
    left_s = np.cumsum(sums[::-1], axis=0)[::-1][1:]
    left_q = np.cumsum(sqsums[::-1])[::-1][1:]
    tot_s = sums.sum(axis=0)
    tot_q = sqsums.sum()
    right_n = n - left_n
    right_s = tot_s[None, :] - left_s
    right_q = tot_q - left_q

    def weighted_var(cnt, s, q):
        with np.errstate(divide="ignore", invalid="ignore"):
            ssd = np.maximum(q - np.einsum("km,km->k", s, s) / cnt, 0.0)
            v = ssd / (n_pixels * (cnt - 1))
        return np.where(cnt >= 2, v * cnt, 0.0)

    obj_sorted = (weighted_var(left_n, left_s, left_q)
                  + weighted_var(right_n, right_s, right_q)) / n
    valid = (left_n >= min_child) & (right_n >= min_child)
    obj_sorted = np.where(valid, obj_sorted, np.inf)
    obj = np.empty_like(obj_sorted)
    obj[order] = obj_sorted
    return obj


def best_split_arrays(feats, motion, node_iters, threshold_iters, min_child, rng, log=None):
    """Best split of one node given its descriptors (N, F) and motion (N, P, D).

    Evaluates ``node_iters`` candidate families x ``threshold_iters``
    thresholds and keeps the lowest size-weighted child variance; the first
    candidate wins ties (values within ``TIE_REL`` relative). Children smaller than ``min_child`` disqualify a
    candidate. Returns None if nothing qualifies. ``log``, if given, receives
    ``(SplitRecord, objective)`` for every candidate in draw order.
    """
    n = feats.shape[0]
    if n < 2:
        raise DataError("need at least two samples to split")
    n_pixels = motion.shape[1]
    flat = motion.reshape(n, -1).astype(np.float64)
    xc = np.ascontiguousarray(flat - flat.mean(axis=0))
    sqn = np.einsum("nm,nm->n", xc, xc)
    best = None
    best_obj = np.inf
    for _ in range(node_iters):
        kind, p1, p2, resp, thresholds = draw_candidate(rng, feats.shape[1], feats, threshold_iters)
        obj = _objectives(resp, thresholds, xc, sqn, n_pixels, min_child)
        if log is not None:
            log.extend((SplitRecord(kind, p1, p2, float(t)), float(o)) for t, o in zip(thresholds, obj))
        lo = obj.min()
        if not lo < best_obj * (1.0 - TIE_REL):
            continue
        k = int(np.flatnonzero(obj <= lo * (1.0 + TIE_REL))[0])
        best_obj = float(obj[k])
        best = (SplitRecord(kind, p1, p2, float(thresholds[k])), resp >= thresholds[k])
    if best is None:
        return None
    split, go_left = best
    return SplitResult(split, best_obj, np.flatnonzero(go_left), np.flatnonzero(~go_left))


def best_split(samples, config, rng, log=None):
    """Best split over a TrainingSet using the counts in ``config``."""
    if len(samples) < 2:
        raise DataError("need at least two samples to split")
    return best_split_arrays(samples.descriptors, samples.motion, config.node_iters,
                             config.threshold_iters, config.min_child, rng, log)
