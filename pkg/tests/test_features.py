import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from motionsrf.config import ForestConfig
from motionsrf.errors import DataError
from motionsrf.features import (HOG_DIMS, PatchGeometry, TrainingSet, build_training_set,
                                extract_hof, extract_hog, extract_mbh, extract_motion_patch,
                                hog_batch, pair_samples, sample_patch_centers)
from motionsrf.imagecore import to_opponent

from conftest import textured


def test_no_edges_no_centers():
    assert sample_patch_centers(np.zeros((10, 10), bool), 3) == []


def test_full_mask_interior():
    geoms = sample_patch_centers(np.ones((9, 9), bool), 3)
    assert len(geoms) == 49
    assert {(g.center_y, g.center_x) for g in geoms} == {(y, x) for y in range(1, 8) for x in range(1, 8)}


def test_stride_and_cap():
    mask = np.ones((30, 30), bool)
    geoms = sample_patch_centers(mask, 5, stride=3)
    assert all((g.center_y - 2) % 3 == 0 and (g.center_x - 2) % 3 == 0 for g in geoms)
    capped = sample_patch_centers(mask, 5, max_samples=17, seed=4)
    assert len(capped) == 17
    assert capped == sample_patch_centers(mask, 5, max_samples=17, seed=4)
    assert capped != sample_patch_centers(mask, 5, max_samples=17, seed=5)


def test_centers_reject_bad_sizes():
    with pytest.raises(DataError):
        sample_patch_centers(np.ones((5, 5), bool), 4)
    with pytest.raises(DataError):
        sample_patch_centers(np.ones((5, 5), bool), 7)


def test_hog_constant_patch_is_zero(backend):
    img = np.full((11, 11, 3), 0.3)
    d = extract_hog(img, PatchGeometry(5, 5, 9))
    assert d.shape == (HOG_DIMS,)
    np.testing.assert_array_equal(d, 0.0)


def test_hog_vertical_step_lands_in_90_degree_bin(backend):
    img = np.zeros((9, 9, 3))
    img[:, 5:] = 1.0
    d = extract_hog(img, PatchGeometry(4, 4, 9)).reshape(3, 4, 9)
    for c in range(3):
        for cell in range(4):
            h = d[c, cell]
            assert h.sum() > 0
            # bin 4 is centred on 90 degrees
            assert np.argmax(h) == 4
            assert h[4] / h.sum() > 0.99


def test_hog_matches_between_batch_and_single(backend):
    img = to_opponent(textured(20, 20))
    centers = np.array([[5, 5], [10, 12], [14, 6]])
    batch = hog_batch(img, centers, 9)
    for (r, c), row in zip(centers, batch):
        np.testing.assert_array_equal(extract_hog(img, PatchGeometry(int(c), int(r), 9)), row)


@given(arrays(np.float64, (9, 9, 3), elements=st.floats(0, 1)), st.integers(0, 2), st.floats(-0.5, 0.5))
def test_hog_invariant_to_channel_offset(img, ch, off):
    g = PatchGeometry(4, 4, 9)
    shifted = img.copy()
    shifted[..., ch] += off
    a = extract_hog(img, g)
    b = extract_hog(shifted, g)
    assert a.shape == (HOG_DIMS,)
    assert np.max(np.abs(a - b)) <= 1e-9


@given(st.integers(3, 15).filter(lambda s: s % 2 == 1), st.integers(0, 1000))
def test_hog_length_and_norm(size, seed):
    img = np.random.default_rng(seed).random((size, size, 3))
    d = extract_hog(img, PatchGeometry(size // 2, size // 2, size)).reshape(3, -1)
    assert d.size == HOG_DIMS
    assert np.all(np.linalg.norm(d, axis=1) <= 1.0 + 1e-12)


def test_motion_patch_constant():
    field = np.zeros((7, 7, 2))
    field[...] = (2.0, -1.0)
    p = extract_motion_patch(field, PatchGeometry(3, 3, 3))
    assert p.shape == (9, 2)
    np.testing.assert_array_equal(p, np.tile([2.0, -1.0], (9, 1)))


def test_motion_patch_crop_embed_and_index_oracle():
    field = np.random.default_rng(0).normal(size=(12, 10, 4))
    g = PatchGeometry(4, 7, 5)
    p = extract_motion_patch(field, g)
    canvas = np.zeros_like(field)
    rows, cols = g.window()
    canvas[rows, cols] = p.reshape(5, 5, 4)
    np.testing.assert_array_equal(canvas[rows, cols], field[rows, cols])
    for k in range(25):
        dy, dx = divmod(k, 5)
        np.testing.assert_array_equal(p[k], field[7 - 2 + dy, 4 - 2 + dx])
    with pytest.raises(DataError):
        extract_motion_patch(field, PatchGeometry(1, 1, 5))


def test_hof_zero_and_uniform():
    zero = extract_hof(np.zeros((5, 5, 2)))
    np.testing.assert_array_equal(zero, [0] * 8 + [1])
    right = np.zeros((5, 5, 2))
    right[..., 0] = 1.0
    h = extract_hof(right)
    assert h[0] == 1.0 and h.sum() == 1.0


def test_hof_directions_by_octant():
    for k in range(8):
        ang = np.radians(45 * k + 20)
        f = np.zeros((3, 3, 2))
        f[...] = (np.cos(ang), np.sin(ang))
        assert np.argmax(extract_hof(f)) == k


@given(arrays(np.float64, (6, 6, 2), elements=st.floats(-5, 5)))
def test_hof_l1_normalized(f):
    h = extract_hof(f)
    assert h.shape == (9,)
    assert abs(h.sum() - 1.0) <= 1e-12
    assert np.all(h >= 0)


def test_mbh_constant_and_ramp():
    np.testing.assert_array_equal(extract_mbh(np.full((6, 6, 2), 1.5)), 0.0)
    ramp = np.zeros((7, 7, 2))
    ramp[..., 0] = np.arange(7)[None, :]
    m = extract_mbh(ramp)
    assert m.shape == (18,)
    u = m[:9]
    assert np.argmax(u) == 4 and u[4] / u.sum() > 0.999
    np.testing.assert_array_equal(m[9:], 0.0)


@given(arrays(np.float64, (6, 6, 2), elements=st.floats(-5, 5)))
def test_mbh_halves_normalized(f):
    m = extract_mbh(f)
    assert m.shape == (18,)
    for half in (m[:9], m[9:]):
        n = np.linalg.norm(half)
        assert n <= 1.0 + 1e-12
        if n > 0.5:
            assert abs(n - 1.0) <= 1e-6


def test_region_forms_agree():
    f = np.random.default_rng(2).normal(size=(10, 10, 2))
    g = PatchGeometry(5, 4, 5)
    np.testing.assert_array_equal(extract_hof(f, g), extract_hof(f, (3, 2, 8, 7)))
    np.testing.assert_array_equal(extract_mbh(f, g), extract_mbh(f, (3, 2, 8, 7)))
    with pytest.raises(DataError):
        extract_hof(f, (0, 0, 11, 3))


def _frame_with_constant_flow(seed=0):
    img = np.full((40, 40, 3), 0.5)
    rng = np.random.default_rng(seed)
    img[8:32, 8:32] = np.kron(rng.integers(0, 2, (4, 4)), np.ones((6, 6)))[..., None]
    flow = np.zeros((40, 40, 2))
    flow[...] = (1.5, -0.5)
    return img, flow


def test_constant_flow_gives_constant_motion_patches():
    img, flow = _frame_with_constant_flow()
    s = pair_samples(img, flow, ForestConfig(patch_size=7, max_samples=1000))
    assert len(s) > 0
    np.testing.assert_array_equal(s.motion, np.broadcast_to([1.5, -0.5], s.motion.shape))


def test_samples_deterministic_and_capped():
    img, flow = _frame_with_constant_flow(1)
    cfg = ForestConfig(patch_size=7, max_samples=25, seed=9)
    a = build_training_set([(img, flow), (img, flow)], cfg)
    b = build_training_set([(img, flow), (img, flow)], cfg)
    np.testing.assert_array_equal(a.descriptors, b.descriptors)
    np.testing.assert_array_equal(a.centers, b.centers)
    assert np.all(np.bincount(a.source_ids) <= 25)


def test_descriptors_recompute_bit_for_bit():
    img, flow = _frame_with_constant_flow(2)
    s = pair_samples(img, flow, ForestConfig(patch_size=9, max_samples=40))
    opp = to_opponent(img)
    for i in range(len(s)):
        sample = s[i]
        assert np.array_equal(extract_hog(opp, sample.geometry), sample.descriptor)
        assert np.array_equal(extract_motion_patch(flow, sample.geometry), sample.motion)


def test_derivative_labels_and_empty_sets():
    img, flow = _frame_with_constant_flow()
    s = pair_samples(img, flow, ForestConfig(patch_size=7, label_dims=4))
    assert s.motion.shape[2] == 4
    np.testing.assert_array_equal(s.motion, 0.0)
    flat = pair_samples(np.full((20, 20, 3), 0.5), np.zeros((20, 20, 2)), ForestConfig(patch_size=5))
    assert len(flat) == 0
    with pytest.raises(DataError):
        build_training_set([(np.full((20, 20, 3), 0.5), np.zeros((20, 20, 2)))])
    same = pair_samples(img, flow, ForestConfig(patch_size=7))
    assert len(TrainingSet.concat([TrainingSet.empty(7, 2), same.subset(np.arange(3))])) == 3
    with pytest.raises(DataError):
        TrainingSet.concat([flat, same])
