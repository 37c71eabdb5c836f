"""The numba and numpy backends must agree."""

import os
import subprocess
import sys

import numpy as np
import pytest

from motionsrf import kernels
from motionsrf.features import HOG_DIMS
from motionsrf.imagecore import smoothed_gradients, to_gray

pytestmark = pytest.mark.skipif("numba" not in kernels.available(), reason="numba missing")


def both(name, *args):
    with kernels.use_backend("numba"):
        a = getattr(kernels, name)(*args)
    with kernels.use_backend("numpy"):
        b = getattr(kernels, name)(*args)
    return a, b


def blocky(seed, h=48, w=48):
    rng = np.random.default_rng(seed)
    return np.kron(rng.random((h // 4, w // 4, 3)), np.ones((4, 4, 1)))


@pytest.mark.parametrize("seed", range(4))
def test_nms_and_hysteresis(seed):
    gray = np.ascontiguousarray(to_gray(blocky(seed)))
    gx, gy, mag = smoothed_gradients(gray)
    a, b = both("nms", mag, gx, gy)
    np.testing.assert_array_equal(a, b)
    a2, b2 = both("hysteresis", a, 0.05, 0.12)
    np.testing.assert_array_equal(a2, b2)


@pytest.mark.parametrize("size", [3, 5, 8, 13])
def test_orientation_hist(size):
    img = np.ascontiguousarray(np.random.default_rng(size).random((30, 30, 3)))
    half = size // 2
    centers = np.array([[half, half], [15, 15], [29 - half, 29 - half], [10, 20]], dtype=np.int64)
    a, b = both("orientation_hist", img, centers, size, 2)
    assert a.shape == (4, HOG_DIMS)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_tree_apply():
    rng = np.random.default_rng(0)
    kind = np.array([1, 3, 0, 4, 0, 0, 0], np.int64)
    p1 = np.array([0, 5, 0, 2, 0, 0, 0], np.int64)
    p2 = np.array([1, 6, 0, 7, 0, 0, 0], np.int64)
    thr = np.array([0.5, 0.0, 0, 0.3, 0, 0, 0])
    left = np.array([1, 2, -1, 4, -1, -1, -1], np.int64)
    right = np.array([6, 3, -1, 5, -1, -1, -1], np.int64)
    feats = rng.random((500, HOG_DIMS))
    a, b = both("tree_apply", kind, p1, p2, thr, left, right, feats)
    np.testing.assert_array_equal(a, b)
    assert set(np.unique(a)) <= {2, 4, 5, 6}


def test_split_group_sums():
    rng = np.random.default_rng(1)
    resp = rng.random(200)
    ts = np.sort(rng.random(7))
    xc = rng.normal(size=(200, 12))
    sqn = np.einsum("ij,ij->i", xc, xc)
    a, b = both("split_group_sums", resp, ts, xc, sqn)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(a[0], np.bincount(np.searchsorted(ts, resp, "right"), minlength=8))


def test_splat_and_accumulate():
    rng = np.random.default_rng(2)
    img = np.ascontiguousarray(rng.random((16, 18, 3)))
    dx = rng.uniform(-4, 4, (16, 18))
    dy = rng.uniform(-4, 4, (16, 18))
    (acc_a, w_a), (acc_b, w_b) = both("splat", img, dx, dy)
    np.testing.assert_allclose(acc_a, acc_b, atol=1e-12)
    np.testing.assert_allclose(w_a, w_b, atol=1e-12)
    centers = np.array([[3, 3], [5, 6], [12, 14]], np.int64)
    patches = rng.normal(size=(3, 49, 2))
    (s_a, c_a), (s_b, c_b) = both("accumulate_patches", centers, patches, 7, 16, 18)
    np.testing.assert_allclose(s_a, s_b, atol=1e-12)
    np.testing.assert_array_equal(c_a, c_b)


def test_backend_switching():
    prev = kernels.backend()
    with kernels.use_backend("numpy"):
        assert kernels.backend() == "numpy"
    assert kernels.backend() == prev
    with pytest.raises(ValueError):
        kernels.set_backend("fortran")


def test_env_flag_selects_backend():
    env = dict(os.environ, MOTIONSRF_BACKEND="numpy")
    out = subprocess.run([sys.executable, "-c", "from motionsrf import kernels; print(kernels.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
