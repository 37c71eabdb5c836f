"""Forest and sampling configuration, plus the key=value config file format."""

import dataclasses
import math
from dataclasses import dataclass, fields

from .errors import DataError


class ConfigError(DataError):
    pass


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 11
    node_iters: int = 50
    threshold_iters: int = 10
    max_leaves: int = 1000
    var_threshold: float = 0.1
    patch_size: int = 0  # 0: derive from the first training image
    label_dims: int = 2
    frame_pairs_per_tree: int = 20
    min_child: int = 5
    seed: int = 0
    stride: int = 1
    max_samples: int = 500
    canny_sigma: float = 1.4
    canny_low: float = 0.1
    canny_high: float = 0.2

    def __post_init__(self):
        for name in ("n_trees", "node_iters", "threshold_iters", "max_leaves",
                     "frame_pairs_per_tree", "min_child", "stride", "max_samples"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.patch_size < 0 or (self.patch_size and self.patch_size % 2 == 0):
            raise ConfigError("patch_size must be odd (or 0 for automatic)")
        if self.label_dims not in (2, 4):
            raise ConfigError("label_dims must be 2 (flow) or 4 (flow derivatives)")
        if not self.var_threshold >= 0:
            raise ConfigError("var_threshold must be >= 0")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if not all(math.isfinite(v) for v in (self.canny_sigma, self.canny_low, self.canny_high)):
            raise ConfigError("Canny parameters must be finite")
        if not self.canny_high >= self.canny_low >= 0:
            raise ConfigError("need canny_high >= canny_low >= 0")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def with_patch_size_for(self, width, height):
        if self.patch_size:
            return self
        return self.replace(patch_size=default_patch_size(width, height))


def default_patch_size(width, height):
    """About a fifth of the larger image side, forced odd."""
    size = int(round(max(width, height) / 5.0))
    if size % 2 == 0:
        size += 1
    return max(size, 3)


def _coerce(field, text):
    if field.type in (int, "int"):
        return int(text)
    if field.type in (float, "float"):
        return float(text)
    return text


def parse_config_text(text, base=None):
    """Parse ``key=value`` lines (``#`` comments) onto ``base``."""
    known = {f.name: f for f in fields(ForestConfig)}
    changes = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            changes[key] = _coerce(known[key], value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from exc
    return (base or ForestConfig()).replace(**changes)


def load_config(path, base=None):
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base)


def dump_config(cfg):
    return "".join(f"{f.name}={getattr(cfg, f.name)}\n" for f in fields(cfg))
