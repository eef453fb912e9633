import csv
import json

import numpy as np
import pytest

from tvtv import fileio
from tvtv.cli import main, summary_cell


def run(root, *args):
    return main(["--out-dir", str(root), *args])


def pipeline(root, size=32, accel=4, sens=False):
    assert run(root, "phantom", "--rows", str(size), "--cols", str(size), "--out", "gt") == 0
    assert run(root, "mask", "--rows", str(size), "--cols", str(size), "--accel", str(accel),
               "--center-lines", str(size // 8), "--seed", "7", "--out", "m") == 0
    extra = []
    if sens:
        assert run(root, "sens", "--rows", str(size), "--cols", str(size), "--coils", "4", "--out", "s") == 0
        extra = ["--sens", "s"]
    assert run(root, "measure", "--image", "gt", "--mask", "m", *extra, "--out", "b") == 0
    assert run(root, "degrade", "--image", "gt", "--kind", "blur", "--sigma", "1.5", "--seed", "3", "--out", "w") == 0
    assert run(root, "reconstruct", "--b", "b", "--w", "w", "--mask", "m", *extra,
               "--out", "xhat", "--trace", "trace.csv") == 0
    return extra


def test_phantom_command(tmp_path, capsys):
    assert run(tmp_path, "phantom", "--rows", "64", "--cols", "64", "--out", "gt") == 0
    assert (tmp_path / "gt.cimg").exists() and (tmp_path / "gt.cimg.json").exists()
    first = (tmp_path / "gt.cimg").read_bytes()
    assert run(tmp_path, "phantom", "--rows", "64", "--cols", "64", "--out", "gt") == 0
    assert (tmp_path / "gt.cimg").read_bytes() == first
    assert run(tmp_path, "phantom", "--rows", "8", "--cols", "8", "--out", "bad") != 0
    assert "dimensions too small" in capsys.readouterr().err


def test_mask_command(tmp_path):
    assert run(tmp_path, "mask", "--rows", "64", "--cols", "64", "--accel", "4", "--center-lines", "8",
               "--seed", "7", "--out", "m") == 0
    mask = fileio.read_mask(tmp_path / "m")
    assert abs(mask.m - 64 * 64 / 4) <= 64


def test_seed_is_mandatory(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run(tmp_path, "mask", "--rows", "16", "--cols", "16", "--accel", "2", "--center-lines", "2", "--out", "m")
    assert exc.value.code != 0


def test_full_pipeline_is_consistent(tmp_path, capsys):
    pipeline(tmp_path, size=64)
    out = capsys.readouterr().out
    assert "consistency" in out and "objective" in out
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    stage = manifest["stages"][-1]
    assert stage["command"] == "reconstruct"
    b, _ = fileio.read_measurements(tmp_path / "b")
    assert stage["info"]["consistency_x_hat"] <= 1e-8 * max(1.0, np.linalg.norm(b))
    assert set(stage["outputs"]) == {"xhat.cimg.json", "xhat.cimg", "trace.csv"}
    rows = list(csv.reader(open(tmp_path / "trace.csv")))
    assert rows[0][0] == "iteration" and len(rows) == stage["info"]["iterations_run"] + 1


def test_nonconvergence_warns_and_succeeds(tmp_path, capsys):
    pipeline(tmp_path)
    assert run(tmp_path, "reconstruct", "--b", "b", "--w", "w", "--mask", "m", "--max-iters", "3",
               "--out", "x3") == 0
    assert "warning" in capsys.readouterr().err


def test_beta_zero_pass_through(tmp_path):
    pipeline(tmp_path)
    assert run(tmp_path, "reconstruct", "--b", "b", "--w", "w", "--mask", "m", "--beta", "0",
               "--preset", "crnn", "--out", "x0") == 0
    stage = json.loads((tmp_path / "manifest.json").read_text())["stages"][-1]
    assert stage["info"]["config"]["beta"] == 0.0
    assert stage["info"]["config"]["max_iters"] == 50


def test_mask_mismatch(tmp_path, capsys):
    pipeline(tmp_path)
    run(tmp_path, "mask", "--rows", "32", "--cols", "32", "--accel", "4", "--center-lines", "4",
        "--seed", "8", "--out", "m2")
    assert run(tmp_path, "reconstruct", "--b", "b", "--w", "w", "--mask", "m2", "--out", "x") != 0
    assert "measurement/mask mismatch" in capsys.readouterr().err


def test_multicoil_pipeline(tmp_path):
    extra = pipeline(tmp_path, sens=True)
    assert run(tmp_path, "evaluate", "--ref", "gt", "--test", "xhat", "--op-files", "m", "b", *extra,
               "--out", "metrics.csv") == 0
    rows = list(csv.DictReader(open(tmp_path / "metrics.csv")))
    b, header = fileio.read_measurements(tmp_path / "b")
    assert header["coil_count"] == 4
    assert float(rows[0]["consistency"]) <= 1e-8 * max(1.0, np.linalg.norm(b))


def test_evaluate_identical(tmp_path):
    pipeline(tmp_path)
    assert run(tmp_path, "evaluate", "--ref", "gt", "--test", "gt", "--op-files", "m", "b",
               "--out", "e.csv") == 0
    row = list(csv.DictReader(open(tmp_path / "e.csv")))[0]
    assert float(row["psnr_db"]) == float("inf")
    assert float(row["ssim"]) == pytest.approx(1.0, abs=1e-12)
    assert float(row["consistency"]) == 0.0


def test_evaluate_summary_row(tmp_path):
    pipeline(tmp_path)
    run(tmp_path, "degrade", "--image", "gt", "--kind", "blur", "--sigma", "2.5", "--seed", "3", "--out", "w2")
    assert run(tmp_path, "evaluate", "--ref", "gt", "--test", "w", "--test", "w2", "--test", "xhat",
               "--op-files", "m", "b", "--crop", "auto", "--png-dir", "png", "--out", "e.csv") == 0
    rows = list(csv.DictReader(open(tmp_path / "e.csv")))
    assert [r["case_id"] for r in rows] == ["w", "w2", "xhat", "summary"]
    psnrs = [float(r["psnr_db"]) for r in rows[:3]]
    mean = sum(psnrs) / 3
    std = (sum((p - mean) ** 2 for p in psnrs) / 3) ** 0.5
    expected = f"{mean:.6g} ± {std:.6g}, {min(psnrs):.6g}/{max(psnrs):.6g}"
    assert rows[3]["psnr_db"] == expected
    assert len(list((tmp_path / "png").glob("*.png"))) == 9


def test_summary_cell_format():
    assert summary_cell([1.0, 3.0]) == "2 ± 1, 1/3"


def test_evaluate_missing_file(tmp_path, capsys):
    pipeline(tmp_path)
    assert run(tmp_path, "evaluate", "--ref", "gt", "--test", "nothere", "--out", "e.csv") != 0
    assert "nothere.cimg" in capsys.readouterr().err


def test_boundcheck_zero_map(tmp_path):
    # with seed 2 the estimated gap c is positive, so every row is a genuine check
    assert run(tmp_path, "boundcheck", "--model", "zero", "--accel", "4", "--delta-grid", "0.25,0.5,0.75",
               "--relative", "--trials", "10000", "--seed", "2", "--out", "bc.csv") == 0
    rows = list(csv.DictReader(open(tmp_path / "bc.csv")))
    assert [r["status"] for r in rows] == ["pass"] * 3


def test_boundcheck_negative_gap_is_not_applicable(tmp_path):
    # an untrained map has zero true gap; seed 1 estimates c < 0 and the bound does not apply
    assert run(tmp_path, "boundcheck", "--model", "zero", "--delta-grid", "0.5", "--relative",
               "--trials", "10000", "--seed", "1", "--out", "bc.csv") == 0
    row = list(csv.DictReader(open(tmp_path / "bc.csv")))[0]
    assert row["status"] == "not-applicable" and float(row["c"]) < 0


def test_boundcheck_right_inverse_not_applicable(tmp_path, capsys):
    assert run(tmp_path, "boundcheck", "--model", "zero-filled", "--delta-grid", "0.1,1,10",
               "--trials", "100", "--seed", "1", "--out", "bc.csv") == 0
    assert "bound not applicable" in capsys.readouterr().out
    rows = list(csv.DictReader(open(tmp_path / "bc.csv")))
    assert all(r["status"] == "not-applicable" and float(r["empirical_probability"]) == 0 for r in rows)


def test_boundcheck_deterministic_and_threads(tmp_path, monkeypatch):
    args = ["boundcheck", "--model", "blur", "--fit", "--delta-grid", "0.3,0.6", "--relative",
            "--trials", "150", "--seed", "4"]
    assert run(tmp_path, *args, "--out", "a.csv") == 0
    monkeypatch.setenv("TVTV_THREADS", "3")
    assert run(tmp_path, *args, "--out", "b.csv") == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    monkeypatch.setenv("TVTV_THREADS", "many")
    assert run(tmp_path, *args, "--out", "c.csv") != 0


def test_boundcheck_needs_100_trials(tmp_path):
    assert run(tmp_path, "boundcheck", "--model", "zero", "--delta-grid", "1", "--trials", "50",
               "--seed", "1", "--out", "bc.csv") != 0


def test_replay_reproduces_bit_identically(tmp_path, capsys):
    first = tmp_path / "first"
    pipeline(first)
    run(first, "evaluate", "--ref", "gt", "--test", "w", "--test", "xhat", "--op-files", "m", "b",
        "--out", "metrics.csv")
    second = tmp_path / "second"
    assert main(["--out-dir", str(second), "replay", "--manifest", str(first / "manifest.json")]) == 0
    assert "bit-identically" in capsys.readouterr().out
    for name in ("xhat.cimg", "trace.csv", "metrics.csv", "b.meas", "m.mask"):
        assert (first / name).read_bytes() == (second / name).read_bytes()
