"""Synthetic frame pairs with exact ground-truth flow.

Each frame shows textured squares on a plain background; between the two
frames of a pair every square moves by the integer displacement of its
texture class. The flow of the first frame is that displacement inside the
square and zero elsewhere.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError
from ..flowio import write_flo
from ..imagecore import save_image
from .manifest import CorpusManifest, ManifestEntry, write_manifest

BACKGROUND = (0.5, 0.5, 0.5)

# two colours per texture; gray-level contrast stays above 0.8 so texture
# edges clear the default Canny high threshold
_PALETTES = {
    "checkerboard": ((0.2, 0.0, 0.0), (1.0, 1.0, 0.85)),
    "stripes": ((0.0, 0.0, 0.25), (1.0, 0.95, 0.7)),
    "hstripes": ((0.0, 0.2, 0.0), (0.95, 1.0, 0.95)),
    "dots": ((0.0, 0.0, 0.0), (0.85, 1.0, 1.0)),
}
TEXTURES = tuple(_PALETTES)


@dataclass(frozen=True)
class TextureRule:
    texture: str
    dx: int
    dy: int

    def __post_init__(self):
        if self.texture not in _PALETTES:
            raise DataError(f"unknown texture {self.texture!r}; choose from {TEXTURES}")


def parse_rule(text):
    """``"checkerboard:2,0"`` -> TextureRule."""
    try:
        name, motion = text.split(":")
        dx, dy = (int(v) for v in motion.split(","))
    except ValueError as exc:
        raise DataError(f"bad texture rule {text!r}; expected name:dx,dy") from exc
    return TextureRule(name.strip(), dx, dy)


def texture_pattern(texture, height, width, phase=0, period=6):
    """Binary pattern in shape-local coordinates (True selects colour 0)."""
    yy, xx = np.mgrid[0:height, 0:width]
    yy = yy + phase
    xx = xx + phase
    if texture == "checkerboard":
        return ((yy // period) + (xx // period)) % 2 == 0
    if texture == "stripes":
        return (xx // (period - 1)) % 2 == 0
    if texture == "hstripes":
        return (yy // (period - 1)) % 2 == 0
    if texture == "dots":
        return ((yy % (2 * period)) < period // 2 + 1) & ((xx % (2 * period)) < period // 2 + 1)
    raise DataError(f"unknown texture {texture!r}")


def _paint(canvas, pattern, palette, y, x):
    h, w = pattern.shape
    c0, c1 = (np.asarray(c) for c in palette)
    canvas[y:y + h, x:x + w] = np.where(pattern[..., None], c0, c1)


def _place(rng, rules, width, height, side_range):
    """Non-overlapping square placements valid in both frames."""
    for _ in range(1000):
        boxes = []
        for rule in rules:
            side = int(rng.integers(side_range[0], side_range[1] + 1))
            lo_x = max(1, -rule.dx + 1)
            hi_x = min(width - side - 1, width - side - rule.dx - 1)
            lo_y = max(1, -rule.dy + 1)
            hi_y = min(height - side - 1, height - side - rule.dy - 1)
            if hi_x < lo_x or hi_y < lo_y:
                raise DataError("frame too small for the requested shapes and motions")
            x = int(rng.integers(lo_x, hi_x + 1))
            y = int(rng.integers(lo_y, hi_y + 1))
            boxes.append((x, y, side))
        if not _overlaps(boxes, rules):
            return boxes
    raise DataError("could not place non-overlapping shapes; use a larger frame")


def _overlaps(boxes, rules, gap=3):
    # swept extents over both frames must stay apart
    ext = []
    for (x, y, s), r in zip(boxes, rules):
        x0, x1 = min(x, x + r.dx), max(x, x + r.dx) + s
        y0, y1 = min(y, y + r.dy), max(y, y + r.dy) + s
        ext.append((x0 - gap, y0 - gap, x1 + gap, y1 + gap))
    for i in range(len(ext)):
        for j in range(i + 1, len(ext)):
            a, b = ext[i], ext[j]
            if a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]:
                return True
    return False


def render_pair(rules, width, height, rng, side_range=(18, 24)):
    """Returns (frame_t, frame_t1, flow, shape_masks_t)."""
    boxes = _place(rng, rules, width, height, side_range)
    f0 = np.empty((height, width, 3))
    f0[:] = BACKGROUND
    f1 = f0.copy()
    flow = np.zeros((height, width, 2), dtype=np.float32)
    masks = []
    for (x, y, side), rule in zip(boxes, rules):
        phase = int(rng.integers(0, 8))
        pattern = texture_pattern(rule.texture, side, side, phase)
        palette = _PALETTES[rule.texture]
        _paint(f0, pattern, palette, y, x)
        _paint(f1, pattern, palette, y + rule.dy, x + rule.dx)
        flow[y:y + side, x:x + side] = (rule.dx, rule.dy)
        m = np.zeros((height, width), dtype=bool)
        m[y:y + side, x:x + side] = True
        masks.append(m)
    return f0, f1, flow, masks


def gen_synthetic_corpus(rules, out_dir, seed=0, n_pairs=10, width=64, height=64,
                         per_class=False, side_range=(18, 24)):
    """Write frame PNGs, ground-truth .flo files and ``manifest.tsv``.

    With ``per_class`` each pair shows a single texture class (cycling
    through ``rules``) and the manifest carries the class label; otherwise
    every frame shows one square per rule and entries are unlabeled.
    """
    rules = [parse_rule(r) if isinstance(r, str) else r for r in rules]
    if not rules:
        raise DataError("need at least one texture rule")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    entries = []
    for i in range(n_pairs):
        if per_class:
            group = [rules[i % len(rules)]]
            label = group[0].texture
        else:
            group = rules
            label = None
        f0, f1, flow, _ = render_pair(group, width, height, rng, side_range)
        a = out / f"frame_{i:04d}_a.png"
        b = out / f"frame_{i:04d}_b.png"
        fl = out / f"flow_{i:04d}.flo"
        save_image(a, f0)
        save_image(b, f1)
        write_flo(fl, flow)
        entries.append(ManifestEntry(a, fl, b, label))
    manifest = CorpusManifest(entries, out)
    write_manifest(out / "manifest.tsv", manifest)
    return manifest
