"""Binary model files.

Layout, all little-endian::

    b"SRFM"  u32 version
    config block (see _CONFIG)
    u32 tree count
    per tree: u64 seed, u32 sample count, u32 node count, then node records
        in pre-order:
        internal: u8 split type (1..4), u16 p1, u16 p2, f64 threshold,
                  u32 left index, u32 right index
        leaf:     u8 0, u32 population, P*D f32 values
"""

import struct

import numpy as np

from ..config import ConfigError, ForestConfig
from ..errors import DataError, ModelFormatError
from ..features import HOG_DIMS
from .forest import StructuredForest
from .tree import RegressionTree

MAGIC = b"SRFM"
VERSION = 1

_CONFIG = [
    ("n_trees", "I"), ("node_iters", "I"), ("threshold_iters", "I"), ("max_leaves", "I"),
    ("var_threshold", "d"), ("patch_size", "I"), ("label_dims", "I"),
    ("frame_pairs_per_tree", "I"), ("min_child", "I"), ("seed", "Q"), ("stride", "I"),
    ("max_samples", "I"), ("canny_sigma", "d"), ("canny_low", "d"), ("canny_high", "d"),
]
_CONFIG_FMT = "<" + "".join(code for _, code in _CONFIG)
_INTERNAL = struct.Struct("<HHdII")
_LEAF_POP = struct.Struct("<I")
_TREE_HEAD = struct.Struct("<QII")


def dumps_model(forest):
    cfg = forest.config
    parts = [MAGIC, struct.pack("<I", VERSION),
             struct.pack(_CONFIG_FMT, *(getattr(cfg, name) for name, _ in _CONFIG)),
             struct.pack("<I", len(forest.trees))]
    seeds = forest.tree_seeds or [0] * len(forest.trees)
    counts = forest.sample_counts or [0] * len(forest.trees)
    for tree, seed, count in zip(forest.trees, seeds, counts):
        parts.append(_TREE_HEAD.pack(seed, count, tree.n_nodes))
        for i in range(tree.n_nodes):
            k = int(tree.kind[i])
            if k == 0:
                leaf = int(tree.leaf_id[i])
                parts.append(b"\x00" + _LEAF_POP.pack(int(tree.population[leaf])))
                parts.append(np.ascontiguousarray(tree.leaves[leaf], dtype="<f4").tobytes())
            else:
                parts.append(bytes([k]) + _INTERNAL.pack(int(tree.p1[i]), int(tree.p2[i]),
                                                         float(tree.threshold[i]),
                                                         int(tree.left[i]), int(tree.right[i])))
    return b"".join(parts)


def save_model(forest, path):
    with open(path, "wb") as fh:
        fh.write(dumps_model(forest))


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise ModelFormatError("truncated model file")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        if isinstance(fmt, str):
            fmt = struct.Struct(fmt)
        return fmt.unpack(self.take(fmt.size))


def loads_model(buf):
    r = _Reader(buf)
    if r.take(4) != MAGIC:
        raise ModelFormatError("bad magic")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise ModelFormatError(f"unsupported model version {version}")
    values = r.unpack(_CONFIG_FMT)
    try:
        cfg = ForestConfig(**{name: v for (name, _), v in zip(_CONFIG, values)})
    except ConfigError as exc:
        raise ModelFormatError(f"invalid config block: {exc}") from exc
    if cfg.patch_size == 0:
        raise ModelFormatError("model without a patch size")
    n_vals = cfg.patch_size * cfg.patch_size * cfg.label_dims
    (n_trees,) = r.unpack("<I")
    if n_trees == 0:
        raise ModelFormatError("model has no trees")
    trees, seeds, counts = [], [], []
    for _ in range(n_trees):
        seed, count, n_nodes = r.unpack(_TREE_HEAD)
        if n_nodes == 0:
            raise ModelFormatError("empty tree")
        kind = np.zeros(n_nodes, dtype=np.int64)
        p1 = np.zeros(n_nodes, dtype=np.int64)
        p2 = np.zeros(n_nodes, dtype=np.int64)
        thr = np.zeros(n_nodes)
        left = np.full(n_nodes, -1, dtype=np.int64)
        right = np.full(n_nodes, -1, dtype=np.int64)
        leaf_id = np.full(n_nodes, -1, dtype=np.int64)
        leaves, pops = [], []
        for i in range(n_nodes):
            (tag,) = r.take(1)
            if tag == 0:
                (pop,) = r.unpack(_LEAF_POP)
                vals = np.frombuffer(r.take(4 * n_vals), dtype="<f4").astype(np.float32)
                leaf_id[i] = len(leaves)
                leaves.append(vals.reshape(cfg.patch_size * cfg.patch_size, cfg.label_dims))
                pops.append(pop)
            elif 1 <= tag <= 4:
                a, b, t, lc, rc = r.unpack(_INTERNAL)
                if a >= HOG_DIMS or b >= HOG_DIMS:
                    raise ModelFormatError(f"node {i}: feature index out of range")
                kind[i], p1[i], p2[i], thr[i], left[i], right[i] = tag, a, b, t, lc, rc
            else:
                raise ModelFormatError(f"node {i}: bad node tag {tag}")
        if not leaves:
            raise ModelFormatError("tree without leaves")
        tree = RegressionTree(kind, p1, p2, thr, left, right, leaf_id,
                              np.stack(leaves), np.asarray(pops, dtype=np.int64))
        try:
            tree.check()
        except DataError as exc:
            raise ModelFormatError(str(exc)) from exc
        trees.append(tree)
        seeds.append(seed)
        counts.append(count)
    if r.pos != len(buf):
        raise ModelFormatError("trailing bytes after last tree")
    return StructuredForest(cfg, trees, seeds, counts)


def load_model(path):
    with open(path, "rb") as fh:
        return loads_model(fh.read())
