"""Forest training and dense motion prediction on still images."""

import logging
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..config import ForestConfig
from ..errors import DataError
from ..features import HOG_DIMS, TrainingSet, centers_array, hog_batch, pair_samples, sample_patch_centers
from ..imagecore import as_image, canny_edges, to_opponent
from .tree import GrowthTrace, grow_tree

logger = logging.getLogger(__name__)


@dataclass
class StructuredForest:
    config: ForestConfig
    trees: list
    tree_seeds: list = field(default_factory=list)
    sample_counts: list = field(default_factory=list)

    @property
    def patch_size(self):
        return self.config.patch_size

    @property
    def label_dims(self):
        return self.config.label_dims

    def predict_patches(self, feats):
        """Tree-averaged motion patches for each descriptor row: (N, P, D)."""
        if not self.trees:
            raise DataError("forest has no trees")
        feats = np.ascontiguousarray(np.atleast_2d(feats), dtype=np.float64)
        if feats.shape[1] != HOG_DIMS:
            raise DataError(f"expected {HOG_DIMS}-dim descriptors, got {feats.shape[1]}")
        acc = np.zeros((feats.shape[0],) + self.trees[0].patch_shape)
        for tree in self.trees:
            acc += tree.predict(feats)
        return acc / len(self.trees)


def tree_seeds(config):
    return [int(s) for s in np.random.SeedSequence(config.seed).generate_state(config.n_trees, dtype=np.uint64)]


def corpus_samples(corpus, config):
    """Per-pair training sets, each seeded from (config.seed, pair index)."""
    return [pair_samples(img, flow, config, source_id=i) for i, (img, flow) in enumerate(corpus)]


def train_forest(corpus, config=None, traces=None):
    """Train ``config.n_trees`` trees on a list of (image, flow) pairs.

    Tree k draws its own rng from a seed derived from ``config.seed``; it
    trains on ``frame_pairs_per_tree`` pairs drawn without replacement
    (all pairs when the corpus is not larger than that).
    """
    config = config or ForestConfig()
    corpus = list(corpus)
    if not corpus:
        raise DataError("empty training corpus")
    h, w = np.shape(corpus[0][0])[:2]
    config = config.with_patch_size_for(w, h)
    per_pair = corpus_samples(corpus, config)
    if sum(len(p) for p in per_pair) == 0:
        raise DataError("no edge samples found in any training frame")
    seeds = tree_seeds(config)
    trees, counts = [], []
    for k, seed in enumerate(seeds):
        rng = np.random.default_rng(seed)
        if len(corpus) <= config.frame_pairs_per_tree:
            chosen = np.arange(len(corpus))
        else:
            chosen = np.sort(rng.choice(len(corpus), size=config.frame_pairs_per_tree, replace=False))
        samples = TrainingSet.concat([per_pair[i] for i in chosen])
        if len(samples) == 0:
            raise DataError(f"tree {k}: selected frames have no edge samples")
        trace = None
        if traces is not None:
            trace = GrowthTrace()
            traces.append(trace)
        tree = grow_tree(samples, config, rng, trace)
        logger.info("tree %d: %d samples, %d leaves", k, len(samples), tree.n_leaves)
        trees.append(tree)
        counts.append(len(samples))
    return StructuredForest(config, trees, seeds, counts)


def forest_predict_patch(forest, f):
    """Mean over trees of the leaf patch reached by descriptor ``f``: (P, D)."""
    return forest.predict_patches(np.asarray(f)[None, :])[0]


def merge_forests(forests):
    """Union of the trees of compatible forests."""
    forests = list(forests)
    if not forests:
        raise DataError("nothing to merge")
    base = forests[0].config
    for f in forests[1:]:
        if (f.config.patch_size, f.config.label_dims) != (base.patch_size, base.label_dims):
            raise DataError("cannot merge forests with different patch size or label dims")
    trees = [t for f in forests for t in f.trees]
    return StructuredForest(base.replace(n_trees=len(trees)), trees,
                            [s for f in forests for s in f.tree_seeds],
                            [c for f in forests for c in f.sample_counts])


def predict_flow_image(forest, img, edges=None):
    """Dense prediction on a still image.

    Every edge pixel whose patch fits in the image gets a forest prediction;
    each pixel is the mean of all patch predictions covering it. Returns
    ``(field, coverage)`` with field (H, W, D) and zeros where uncovered.
    ``edges`` replaces the Canny mask when given.
    """
    img = as_image(img)
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    height, width = img.shape[:2]
    cfg = forest.config
    size = cfg.patch_size
    if size > height or size > width:
        raise DataError(f"image {width}x{height} smaller than patch size {size}")
    if edges is None:
        edges = canny_edges(img, cfg.canny_low, cfg.canny_high, cfg.canny_sigma)
    elif np.shape(edges) != (height, width):
        raise DataError(f"edge mask {np.shape(edges)} does not match image {img.shape[:2]}")
    centers = centers_array(sample_patch_centers(edges, size))
    d = cfg.label_dims
    if centers.shape[0] == 0:
        return np.zeros((height, width, d)), np.zeros((height, width), dtype=bool)
    feats = hog_batch(to_opponent(img), centers, size)
    patches = forest.predict_patches(feats)
    sums, counts = kernels.accumulate_patches(centers, np.ascontiguousarray(patches), size, height, width)
    coverage = counts > 0
    out = np.zeros_like(sums)
    out[coverage] = sums[coverage] / counts[coverage][:, None]
    return out, coverage
