import hashlib

import numpy as np
import pytest

from motionsrf.apps.manifest import (CorpusManifest, ManifestEntry, format_manifest, load_manifest,
                                     load_pair, parse_manifest)
from motionsrf.apps.synth import TEXTURES, parse_rule, render_pair, texture_pattern
from motionsrf.apps.synth import gen_synthetic_corpus
from motionsrf.errors import DataError
from motionsrf.flowio import read_flo, write_flo
from motionsrf.imagecore import save_image, warp_image


def test_single_square_flow_truth(tmp_path):
    m = gen_synthetic_corpus(["checkerboard:2,0"], tmp_path, seed=0, n_pairs=1)
    flow = read_flo(m.entries[0].flow)
    inside = np.all(flow == [2, 0], axis=-1)
    outside = np.all(flow == 0, axis=-1)
    assert np.all(inside | outside)
    ys, xs = np.nonzero(inside)
    side_y, side_x = ys.max() - ys.min() + 1, xs.max() - xs.min() + 1
    assert side_y == side_x and inside.sum() == side_y * side_x


def _digest(folder):
    h = hashlib.sha256()
    for p in sorted(folder.iterdir()):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()


def test_fixed_seed_identical_bytes(tmp_path):
    rules = ["checkerboard:2,0", "stripes:0,-2"]
    gen_synthetic_corpus(rules, tmp_path / "a", seed=4, n_pairs=3)
    gen_synthetic_corpus(rules, tmp_path / "b", seed=4, n_pairs=3)
    gen_synthetic_corpus(rules, tmp_path / "c", seed=5, n_pairs=3)
    assert _digest(tmp_path / "a") == _digest(tmp_path / "b")
    assert _digest(tmp_path / "a") != _digest(tmp_path / "c")


@pytest.mark.parametrize("rule", ["checkerboard:2,0", "stripes:-2,0", "hstripes:0,3", "dots:1,-1"])
def test_warp_consistency(rule):
    rng = np.random.default_rng(1)
    r = parse_rule(rule)
    f0, f1, flow, masks = render_pair([r], 64, 64, rng)
    out = warp_image(f0, flow, 1.0)
    shape_t = masks[0]
    shape_t1 = np.roll(np.roll(shape_t, r.dy, axis=0), r.dx, axis=1)
    region = shape_t & shape_t1
    assert region.sum() > 100
    assert np.max(np.abs(out[region] - f1[region])) <= 1.0 / 255.0


def test_per_class_labels(tmp_path):
    m = gen_synthetic_corpus(["checkerboard:2,0", "stripes:-2,0"], tmp_path, n_pairs=4, per_class=True)
    assert m.labels() == ["checkerboard", "stripes"]
    assert len(m.by_label("stripes")) == 2


def test_rule_parsing_and_textures():
    assert parse_rule("dots:-1,2").dx == -1
    for bad in ["dots", "dots:1", "plaid:1,0", "dots:a,b"]:
        with pytest.raises(DataError):
            parse_rule(bad)
    for t in TEXTURES:
        pat = texture_pattern(t, 12, 12)
        assert pat.any() and not pat.all()


def test_frame_too_small():
    with pytest.raises(DataError):
        render_pair([parse_rule("checkerboard:2,0")], 20, 20, np.random.default_rng(0))


def test_manifest_parsing(tmp_path):
    text = "# header\nimg.png\t-\tf.flo\n\nimg.png\tnext.png\tf.flo\trun # note\n"
    m = parse_manifest(text, tmp_path)
    assert len(m) == 2
    assert m.entries[0].next_frame is None and m.entries[0].label is None
    assert m.entries[1].next_frame == tmp_path / "next.png" and m.entries[1].label == "run"
    for bad in ["a\tb\n", "a\tb\tc\td\te\n", "-\t-\tf.flo\n"]:
        with pytest.raises(DataError):
            parse_manifest(bad)


def test_manifest_round_trip_and_checks(tmp_path):
    img = np.zeros((6, 8, 3))
    save_image(tmp_path / "a.png", img)
    write_flo(tmp_path / "a.flo", np.zeros((6, 8, 2)))
    write_flo(tmp_path / "bad.flo", np.zeros((5, 8, 2)))
    m = CorpusManifest([ManifestEntry(tmp_path / "a.png", tmp_path / "a.flo", None, "x")], tmp_path)
    (tmp_path / "m.tsv").write_text(format_manifest(m))
    back = load_manifest(tmp_path / "m.tsv")
    assert back.entries == m.entries
    image, flow = load_pair(back.entries[0])
    assert image.shape[:2] == flow.shape[:2]
    with pytest.raises(DataError):
        load_pair(ManifestEntry(tmp_path / "a.png", tmp_path / "bad.flo"))
    (tmp_path / "missing.tsv").write_text("a.png\t-\tnope.flo\n")
    with pytest.raises(DataError):
        load_manifest(tmp_path / "missing.tsv")
