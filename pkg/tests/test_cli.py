import json
import subprocess
import sys

import numpy as np
import pytest

from pottsilp import cli
from pottsilp.io import read_pgm, write_pgm, write_signal_csv
from pottsilp.model import read_lp_file

from external import highs_milp

REPORT_KEYS = ["schema", "model", "input", "status", "objective", "lower_bound", "gap", "wall_time_s",
               "segments", "nodes", "lazy_cuts", "simplex_iterations", "params"]


@pytest.fixture
def two_block(tmp_path):
    img = np.full((4, 4), 40.0)
    img[:, 2:] = 200.0
    path = tmp_path / "two.pgm"
    write_pgm(path, img)
    return path


def run(*args):
    return cli.main([str(a) for a in args])


def test_noise_gaussian_zero_is_identity(tmp_path, two_block):
    out = tmp_path / "n.pgm"
    assert run("noise", two_block, out, "--gaussian", "0", "--seed", "4") == 0
    np.testing.assert_array_equal(read_pgm(out), read_pgm(two_block))


def test_noise_salt_pepper_full(tmp_path, two_block):
    out = tmp_path / "n.pgm"
    assert run("noise", two_block, out, "--salt-pepper", "1.0") == 0
    assert set(np.unique(read_pgm(out))) <= {0.0, 255.0}


def test_noise_reproducible_and_seed_echoed(tmp_path, two_block):
    a, b = tmp_path / "a.pgm", tmp_path / "b.pgm"
    run("noise", two_block, a, "--gaussian", "30", "--seed", "12")
    run("noise", two_block, b, "--gaussian", "30", "--seed", "12")
    assert a.read_bytes() == b.read_bytes()
    assert b"seed=12" in a.read_bytes().split(b"\n")[1]


def test_noise_invalid_spec(tmp_path, two_block):
    assert run("noise", two_block, tmp_path / "x.pgm", "--salt-pepper", "1.5") == 1
    with pytest.raises(SystemExit):
        run("noise", two_block, tmp_path / "x.pgm")


def test_segment_constant_image(tmp_path):
    path = tmp_path / "flat.pgm"
    write_pgm(path, np.full((8, 8), 77.0))
    out = tmp_path / "out"
    assert run("segment2d", path, "--model", "potts2d", "--lambda", "3", "--out-dir", out) == 0
    report = json.loads((out / "flat.report.json").read_text())
    assert list(report) == REPORT_KEYS
    assert report["schema"] == 1
    assert (report["segments"], report["objective"], report["gap"]) == (1, 0.0, 0.0)
    np.testing.assert_array_equal(read_pgm(out / "flat.denoised.pgm"), np.full((8, 8), 77.0))


def test_segment_matches_external_solve_of_export(tmp_path, two_block):
    report_path = tmp_path / "r.json"
    assert run("segment2d", two_block, "--model", "potts2d", "--lambda", "30", "--big-m", "160",
               "--out-dir", tmp_path, "--report", report_path) == 0
    report = json.loads(report_path.read_text())
    lp = tmp_path / "m.lp"
    assert run("export-lp", two_block, lp, "--model", "potts2d", "--lambda", "30", "--big-m", "160") == 0
    ext, _ = highs_milp(read_lp_file(lp.read_text()))
    assert report["objective"] == pytest.approx(ext, abs=1e-6)
    assert report["segments"] == 2 and report["model"] == "potts2d"
    labels = np.loadtxt(tmp_path / "two.labels.csv", delimiter=",")
    np.testing.assert_array_equal(labels[:, :2], 0)
    np.testing.assert_array_equal(labels[:, 2:], 1)


def test_reports_deterministic(tmp_path, two_block):
    texts = []
    for k in range(2):
        rp = tmp_path / f"r{k}.json"
        run("segment2d", two_block, "--model", "potts2d+cuts+card", "--salt-pepper", "0.1", "--seed", "1",
            "--out-dir", tmp_path / f"o{k}", "--report", rp)
        report = json.loads(rp.read_text())
        report.pop("wall_time_s")
        texts.append(json.dumps(report))
    assert texts[0] == texts[1]


def test_multicut_and_jobs(tmp_path, two_block):
    other = tmp_path / "other.pgm"
    write_pgm(other, np.full((3, 3), 10.0))
    out = tmp_path / "out"
    assert run("segment2d", two_block, other, "--model", "multicut", "--jobs", "2", "--out-dir", out) == 0
    r1 = json.loads((out / "two.report.json").read_text())
    r2 = json.loads((out / "other.report.json").read_text())
    assert (r1["segments"], r2["segments"]) == (2, 1)
    np.testing.assert_array_equal(read_pgm(out / "two.denoised.pgm"), read_pgm(two_block))


def test_multicut_weights_file(tmp_path, two_block):
    weights = tmp_path / "w.csv"
    # 4x4 grid: cut only along the middle column of row edges
    weights.write_text("".join(f"{i * 3 + 1},100\n" for i in range(4)))
    out = tmp_path / "out"
    assert run("segment2d", two_block, "--model", "multicut", "--lambda", "10", "--weights", weights,
               "--out-dir", out) == 0
    assert json.loads((out / "two.report.json").read_text())["segments"] == 2


def test_segment_errors(tmp_path, two_block):
    assert run("segment2d", tmp_path / "missing.pgm") == 1
    (tmp_path / "bad.pgm").write_bytes(b"not an image")
    assert run("segment2d", tmp_path / "bad.pgm") == 1
    assert run("segment2d", two_block, two_block, "--report", tmp_path / "r.json") == 1
    assert run("segment2d", two_block, "--lambda", "-1") == 1
    with pytest.raises(SystemExit):
        run("segment2d", two_block, "--model", "nope")


def test_objective_mismatch_is_fatal(tmp_path, two_block, monkeypatch):
    monkeypatch.setattr(cli, "objective_2d", lambda *a: 1e9)
    assert run("segment2d", two_block, "--model", "potts2d", "--out-dir", tmp_path) == 1
    assert not (tmp_path / "two.report.json").exists()


def test_segment1d(tmp_path):
    sig = tmp_path / "s.csv"
    write_signal_csv(sig, [0, 0, 5, 5])
    out, rep = tmp_path / "fit.csv", tmp_path / "r.json"
    for model in ("potts1d-dp", "potts1d-mip"):
        assert run("segment1d", sig, "--model", model, "--lambda", "1", "--out", out, "--report", rep) == 0
        report = json.loads(rep.read_text())
        assert list(report) == REPORT_KEYS
        assert (report["model"], report["objective"], report["segments"]) == (model, 1.0, 2)
        assert out.read_text().splitlines()[3] == "2,5.0,5.0,1"


def test_export_potts1d_counts(tmp_path):
    sig = tmp_path / "s.csv"
    write_signal_csv(sig, [1, 4])
    lp = tmp_path / "m.lp"
    assert run("export-lp", sig, lp, "--model", "potts1d", "--lambda", "2") == 0
    model = read_lp_file(lp.read_text())
    names = [v.name for v in model.variables]
    assert sorted(names) == ["w_0", "w_0_em", "w_0_ep", "w_1", "w_1_em", "w_1_ep", "x_0"]


def test_export_multicut_has_no_rows(tmp_path, two_block):
    lp = tmp_path / "m.lp"
    assert run("export-lp", two_block, lp, "--model", "multicut") == 0
    text = lp.read_text()
    assert any(line.startswith("\\") and "lazily" in line for line in text.splitlines())
    assert read_lp_file(text).constraints == []


def test_console_entry(tmp_path, two_block):
    proc = subprocess.run([sys.executable, "-m", "pottsilp", "segment2d", str(two_block), "--out-dir", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "S=2" in proc.stdout
