"""Regression trees over motion patches, grown worst-first."""

import heapq
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..errors import DataError
from .splits import SplitRecord, SplitType, best_split_arrays, node_variance


@dataclass
class RegressionTree:
    """Array-encoded binary tree in pre-order (children have larger ids).

    ``kind[i]`` is 0 for a leaf, otherwise the SplitType value. Leaves index
    ``leaves`` (float32 mean patches) through ``leaf_id``.
    """
    kind: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_id: np.ndarray
    leaves: np.ndarray
    population: np.ndarray

    @property
    def n_nodes(self):
        return self.kind.shape[0]

    @property
    def n_leaves(self):
        return self.leaves.shape[0]

    @property
    def patch_shape(self):
        return self.leaves.shape[1:]

    def split_at(self, node):
        return SplitRecord(SplitType(int(self.kind[node])), int(self.p1[node]),
                           int(self.p2[node]), float(self.threshold[node]))

    def apply(self, feats):
        """Leaf index reached by each row of ``feats``."""
        feats = np.ascontiguousarray(np.atleast_2d(feats), dtype=np.float64)
        nodes = kernels.tree_apply(self.kind, self.p1, self.p2, self.threshold,
                                   self.left, self.right, feats)
        return self.leaf_id[nodes]

    def predict(self, feats):
        return self.leaves[self.apply(feats)]

    def check(self):
        """Raise DataError if the structural invariants do not hold."""
        n = self.n_nodes
        if n == 0 or self.n_leaves == 0:
            raise DataError("tree has no leaves")
        seen = np.zeros(n, dtype=np.int64)
        for i in range(n):
            if self.kind[i] == 0:
                if not 0 <= self.leaf_id[i] < self.n_leaves:
                    raise DataError(f"node {i}: bad leaf index")
                continue
            for c in (self.left[i], self.right[i]):
                if not i < c < n:
                    raise DataError(f"node {i}: child {c} out of order")
                seen[c] += 1
        if seen[0] != 0 or np.any(seen[1:] != 1):
            raise DataError("tree nodes are not a single rooted tree")
        if np.count_nonzero(self.kind == 0) != self.n_leaves:
            raise DataError("leaf count mismatch")
        if np.any(self.population < 1):
            raise DataError("leaf with empty population")


@dataclass
class GrowthTrace:
    """Event log of worst-first growth, in the order things happened.

    Events are tuples: ``("push", node, var)``, ``("split", node, var,
    leaf_count)`` or ``("leaf", node, var, reason)``. Node ids are growth-time
    ids, not the final pre-order ids.
    """
    events: list = field(default_factory=list)

    def lines(self):
        out = []
        for ev in self.events:
            if ev[0] == "split":
                out.append(f"split node={ev[1]} var={ev[2]:.6g} leaf_count={ev[3]}")
            elif ev[0] == "leaf":
                out.append(f"leaf node={ev[1]} var={ev[2]:.6g} reason={ev[3]}")
            else:
                out.append(f"push node={ev[1]} var={ev[2]:.6g}")
        return out


def grow_tree(samples, config, rng, trace=None):
    """Grow one tree worst-first.

    The frontier is a max-heap on node variance (ties: lower id first). The
    popped node becomes a leaf if its variance is below ``var_threshold``, if
    no admissible split exists, or once the number of terminal nodes reached
    ``max_leaves`` (at which point the whole frontier is turned into leaves).
    """
    n = len(samples)
    if n == 0:
        raise DataError("cannot grow a tree on zero samples")
    feats = np.ascontiguousarray(samples.descriptors, dtype=np.float64)
    motion = samples.motion

    # growth-time node table
    idx_of = {0: np.arange(n)}
    kind, p1, p2, thr, left, right = [0], [0], [0], [0.0], [-1], [-1]
    var_of = {0: node_variance(motion)}
    heap = [(-var_of[0], 0)]
    if trace is not None:
        trace.events.append(("push", 0, var_of[0]))
    terminals = 1

    def make_leaf(node, reason):
        if trace is not None:
            trace.events.append(("leaf", node, var_of[node], reason))

    while heap:
        negv, node = heapq.heappop(heap)
        var = -negv
        idx = idx_of[node]
        if terminals >= config.max_leaves:
            make_leaf(node, "budget")
            for _, rest in sorted(heap, key=lambda e: (e[0], e[1])):
                make_leaf(rest, "budget")
            break
        if var < config.var_threshold or idx.size < 2:
            make_leaf(node, "variance")
            continue
        res = best_split_arrays(feats[idx], motion[idx], config.node_iters,
                                config.threshold_iters, config.min_child, rng)
        if res is None:
            make_leaf(node, "nosplit")
            continue
        s = res.split
        kind[node], p1[node], p2[node], thr[node] = int(s.kind), s.p1, s.p2, s.threshold
        children = []
        for part in (res.left, res.right):
            cid = len(kind)
            kind.append(0)
            p1.append(0)
            p2.append(0)
            thr.append(0.0)
            left.append(-1)
            right.append(-1)
            idx_of[cid] = idx[part]
            var_of[cid] = node_variance(motion[idx[part]])
            children.append(cid)
        left[node], right[node] = children
        terminals += 1
        if trace is not None:
            trace.events.append(("split", node, var, terminals))
        for cid in children:
            heapq.heappush(heap, (-var_of[cid], cid))
            if trace is not None:
                trace.events.append(("push", cid, var_of[cid]))
        del idx_of[node]

    # renumber in pre-order
    order = []
    stack = [0]
    while stack:
        node = stack.pop()
        order.append(node)
        if kind[node] != 0:
            stack.append(right[node])
            stack.append(left[node])
    new_id = {old: new for new, old in enumerate(order)}
    m = len(order)
    t_kind = np.zeros(m, dtype=np.int64)
    t_p1 = np.zeros(m, dtype=np.int64)
    t_p2 = np.zeros(m, dtype=np.int64)
    t_thr = np.zeros(m, dtype=np.float64)
    t_left = np.full(m, -1, dtype=np.int64)
    t_right = np.full(m, -1, dtype=np.int64)
    t_leaf = np.full(m, -1, dtype=np.int64)
    patches, pops = [], []
    for new, old in enumerate(order):
        if kind[old] == 0:
            t_leaf[new] = len(patches)
            members = idx_of[old]
            patches.append(motion[members].astype(np.float64).mean(axis=0).astype(np.float32))
            pops.append(members.size)
        else:
            t_kind[new] = kind[old]
            t_p1[new] = p1[old]
            t_p2[new] = p2[old]
            t_thr[new] = thr[old]
            t_left[new] = new_id[left[old]]
            t_right[new] = new_id[right[old]]
    return RegressionTree(t_kind, t_p1, t_p2, t_thr, t_left, t_right, t_leaf,
                          np.stack(patches), np.asarray(pops, dtype=np.int64))
