"""Hot numeric kernels with a numba path and a pure-numpy path.

The backend is chosen once at import from ``MOTIONSRF_BACKEND`` (``numba`` or
``numpy``); numba is the default when it imports. ``use_backend`` switches
temporarily, which the parity tests and the benchmark rely on.
"""

import logging
import os
from contextlib import contextmanager

from . import _np

logger = logging.getLogger(__name__)

try:
    from . import _nb
except ImportError:  # pragma: no cover - numba is a declared dependency
    _nb = None

_BACKENDS = {"numpy": _np}
if _nb is not None:
    _BACKENDS["numba"] = _nb

ENV_VAR = "MOTIONSRF_BACKEND"


def _initial():
    name = os.environ.get(ENV_VAR, "").strip().lower()
    if not name:
        return "numba" if _nb is not None else "numpy"
    if name not in _BACKENDS:
        logger.warning("%s=%r not available, falling back to numpy", ENV_VAR, name)
        return "numpy"
    return name


_active = _initial()


def available():
    return sorted(_BACKENDS)


def backend():
    return _active


def set_backend(name):
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; available: {available()}")
    _active = name


@contextmanager
def use_backend(name):
    prev = _active
    set_backend(name)
    try:
        yield
    finally:
        set_backend(prev)


def _impl():
    return _BACKENDS[_active]


def nms(mag, gx, gy):
    return _impl().nms(mag, gx, gy)


def hysteresis(mag, low, high):
    return _impl().hysteresis(mag, float(low), float(high))


def orientation_hist(img, centers, size, cells=2):
    return _impl().orientation_hist(img, centers, int(size), int(cells))


def tree_apply(kind, p1, p2, thr, left, right, feats):
    return _impl().tree_apply(kind, p1, p2, thr, left, right, feats)


def split_group_sums(resp, thr_sorted, xc, sqn):
    return _impl().split_group_sums(resp, thr_sorted, xc, sqn)


def splat(img, dx, dy):
    return _impl().splat(img, dx, dy)


def accumulate_patches(centers, patches, size, height, width):
    return _impl().accumulate_patches(centers, patches, int(size), int(height), int(width))
