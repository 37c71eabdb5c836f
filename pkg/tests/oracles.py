"""Independent reference implementations used by the tests."""

import numpy as np


def brute_variance(patches):
    """Explicit sums: sum_s sum_p ||x_sp - mu_p||^2 / (P (|S| - 1))."""
    x = np.asarray(patches, dtype=np.float64)
    n, p, _ = x.shape
    if n < 2:
        return 0.0
    mu = np.zeros(x.shape[1:])
    for i in range(n):
        mu = mu + x[i]
    mu = mu / n
    total = 0.0
    for i in range(n):
        for j in range(p):
            dev = x[i, j] - mu[j]
            total += float(dev @ dev)
    return total / (p * (n - 1))


def coord_variance(patches):
    """Same quantity through per-coordinate unbiased variances."""
    x = np.asarray(patches, dtype=np.float64)
    if x.shape[0] < 2:
        return 0.0
    return float(np.var(x, axis=0, ddof=1).sum() / x.shape[1])


def response(kind, p1, p2, f):
    a, b = f[..., p1], f[..., p2]
    if kind == 1:
        return a
    if kind == 2:
        return a + b
    if kind == 3:
        return a - b
    return np.abs(a - b)


def replay_candidates(rng, feats, node_iters, threshold_iters):
    """Re-draw the candidate (kind, p1, p2, t) list in generation order."""
    out = []
    for _ in range(node_iters):
        kind = int(rng.integers(1, 5))
        p1, p2 = (int(v) for v in rng.choice(feats.shape[1], size=2, replace=False))
        r = response(kind, p1, p2, feats)
        ts = rng.uniform(r.min(), r.max(), size=threshold_iters)
        out.extend((kind, p1, p2, float(t)) for t in ts)
    return out


def candidate_objective(feats, motion, cand, min_child):
    kind, p1, p2, t = cand
    go = response(kind, p1, p2, feats) >= t
    nl, nr = int(go.sum()), int((~go).sum())
    if nl < min_child or nr < min_child:
        return np.inf, go
    obj = (coord_variance(motion[go]) * nl + coord_variance(motion[~go]) * nr) / (nl + nr)
    return obj, go


def traverse(tree, f):
    node = 0
    while tree.kind[node] != 0:
        r = response(int(tree.kind[node]), int(tree.p1[node]), int(tree.p2[node]), f)
        node = tree.left[node] if r >= tree.threshold[node] else tree.right[node]
    return tree.leaves[tree.leaf_id[node]]
