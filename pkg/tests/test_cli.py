import subprocess
import sys

import numpy as np
import pytest

from motionsrf.apps.cli import main
from motionsrf.flowio import write_flo
from motionsrf.srf import load_model

FAST = ["--n-trees", "1", "--max-leaves", "6", "--node-iters", "5", "--max-samples", "80"]


@pytest.fixture(scope="module")
def synth(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["synth", str(d / "c"), "--rule", "checkerboard:2,0", "--rule", "stripes:-2,0",
                 "--pairs", "3", "--seed", "1"]) == 0
    return d


def test_usage_errors_exit_1(capsys):
    assert main([]) == 1
    assert main(["nonsense"]) == 1
    assert main(["train"]) == 1
    assert main(["predict", "x.png", "-o", "y.flo"]) == 1
    assert main(["synth", "d", "--rule", "dots:1,0", "--pairs", "0"]) == 1
    assert "error" in capsys.readouterr().err


def test_help_exit_0(capsys):
    assert main(["--help"]) == 0
    assert "detect-unexpected" in capsys.readouterr().out


def test_data_errors_exit_2(tmp_path):
    assert main(["train", str(tmp_path / "missing.tsv"), "-o", str(tmp_path / "m.srf")]) == 2
    bad = tmp_path / "bad.flo"
    bad.write_bytes(b"garbage!garbage!")
    assert main(["flow2png", str(bad), "-o", str(tmp_path / "x.png")]) == 2
    (tmp_path / "c.cfg").write_text("n_trees=0\n")
    (tmp_path / "m.tsv").write_text("")
    assert main(["train", str(tmp_path / "m.tsv"), "-o", str(tmp_path / "m.srf"),
                 "--config", str(tmp_path / "c.cfg")]) == 2


def test_config_file_and_flag_override(tmp_path, synth):
    cfg = tmp_path / "forest.cfg"
    cfg.write_text("n_trees = 2\nmax_leaves = 5\nnode_iters = 4\nmax_samples = 60\nseed = 3\n")
    manifest = str(synth / "c" / "manifest.tsv")
    assert main(["train", manifest, "-o", str(tmp_path / "a.srf"), "--config", str(cfg)]) == 0
    a = load_model(tmp_path / "a.srf")
    assert len(a.trees) == 2 and a.config.seed == 3 and a.config.max_leaves == 5
    assert main(["train", manifest, "-o", str(tmp_path / "b.srf"), "--config", str(cfg),
                 "--n-trees", "1", "--seed", "9"]) == 0
    b = load_model(tmp_path / "b.srf")
    assert len(b.trees) == 1 and b.config.seed == 9 and b.config.max_leaves == 5


def test_pipeline(tmp_path, synth, capsys):
    c = synth / "c"
    model = str(tmp_path / "m.srf")
    assert main(["train", str(c / "manifest.tsv"), "-o", model, "--seed", "4", *FAST]) == 0
    assert main(["predict", str(c / "frame_0000_a.png"), "-m", model, "-o", str(tmp_path / "p.flo"),
                 "--png", str(tmp_path / "p.png"), "--warp-steps", "1,3"]) == 0
    assert (tmp_path / "p_warp_3.png").exists()
    assert main(["eval", str(tmp_path / "p.flo"), str(c / "flow_0000.flo"), str(c / "frame_0000_a.png"),
                 "--json"]) == 0
    assert '"epe"' in capsys.readouterr().out
    assert main(["eval", model, str(c / "flow_0000.flo"), str(c / "frame_0000_a.png"),
                 "--canny-low", "0.05", "--canny-high", "0.1"]) == 0
    assert main(["detect-unexpected", str(c / "manifest.tsv"), "-m", model, "-m", model]) == 0
    assert "threshold=" in capsys.readouterr().out
    assert main(["pool", str(c / "frame_0001_a.png"), "-m", model, "-o", str(tmp_path / "p.npz"),
                 "--png", str(tmp_path / "pool.png")]) == 0
    assert main(["warp", str(c / "frame_0000_a.png"), str(c / "flow_0000.flo"), "-o",
                 str(tmp_path / "w.png"), "--step", "0.5"]) == 0
    assert main(["flow2png", str(tmp_path / "p.flo"), "-o", str(tmp_path / "f.png"), "--max-mag", "3"]) == 0


def test_module_entry_point(tmp_path):
    write_flo(tmp_path / "z.flo", np.zeros((4, 4, 2)))
    r = subprocess.run([sys.executable, "-m", "motionsrf", "flow2png", str(tmp_path / "z.flo"),
                        "-o", str(tmp_path / "z.png")], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    r = subprocess.run([sys.executable, "-m", "motionsrf", "warp"], capture_output=True, text=True)
    assert r.returncode == 1
