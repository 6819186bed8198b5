import csv
import json
import subprocess
import sys

import pytest

from lorentzlab.cli import CSV_SCHEMAS, emit_plots, expand, main
from lorentzlab.errors import MissingReport


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = main(["run", *args, "--out", str(out)])
    rep = json.loads((out / "report.json").read_text()) if (out / "report.json").exists() else None
    return code, rep, out


def header(path):
    with open(path) as fh:
        return next(csv.reader(fh))


def test_distance_run(tmp_path):
    code, rep, out = run(tmp_path, "distance", "--metric", "flat2", "--to", "2,1")
    assert code == 0
    assert rep["checks"]["bracket"]
    assert rep["results"]["d_hat"] == pytest.approx(3 ** 0.5, abs=1e-9)
    assert header(out / "path.csv") == expand(CSV_SCHEMAS["path.csv"], 2)
    assert (out / "path.dat").exists()
    assert "seconds" not in rep


def test_geodesic_run(tmp_path):
    code, rep, out = run(tmp_path, "geodesic", "--metric", "conformal2", "--span", "2", "--v", "1,0.3")
    assert code == 0
    assert rep["checks"] == {"drift": True, "oracle": True}
    assert header(out / "trajectory.csv") == expand(CSV_SCHEMAS["trajectory.csv"], 2)
    assert (out / "trajectory.dat").exists()


def test_failed_check_exits_2(tmp_path):
    code, rep, _ = run(tmp_path, "calibrate", "--metric", "flat2", "--h=-1,0", "--samples", "100",
                       "--trials", "5")
    assert code == 2
    assert not rep["checks"]["pseudo_time"]


@pytest.mark.parametrize("args", [
    ["run", "distance", "--metric", "nowhere"],
    ["run", "hedlund", "--metric", "hedlund", "--lambdas", "0.5,0.3"],
    ["run", "hedlund", "--metric", "hedlund", "--lambdas", "1,-1,1"],
    ["run", "geodesic", "--step", "-1"],
    ["run", "hedlund", "--metric", "flat2"],
    ["frobnicate"],
])
def test_usage_errors_exit_1(tmp_path, args, capsys):
    assert main(args + (["--out", str(tmp_path / "x")] if args[0] == "run" else [])) == 1


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"metric": "flat2", "colour": "red"}))
    assert main(["run", "distance", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"metric": "flat2", "to": [2, 1], "dx": 0.05}))
    code, rep, _ = run(tmp_path, "distance", "--config", str(cfg), "--dx", "0.02")
    assert code == 0
    assert rep["config"]["dx"] == 0.02


def test_bad_thread_count(tmp_path, monkeypatch):
    monkeypatch.setenv("LORENTZ_THREADS", "many")
    assert main(["run", "distance", "--out", str(tmp_path / "o")]) == 1


def test_thread_count_does_not_change_reports(tmp_path, monkeypatch):
    blobs = []
    for n in ("1", "4"):
        monkeypatch.setenv("LORENTZ_THREADS", n)
        code, _, out = run(tmp_path, "measures", "--metric", "flat2", "--N", "3", name=f"o{n}")
        assert code == 0
        blobs.append((out / "report.json").read_bytes())
    assert blobs[0] == blobs[1]


def test_emit_plots_needs_a_report(tmp_path):
    with pytest.raises(MissingReport):
        emit_plots(str(tmp_path))


def test_help_lists_schemas():
    res = subprocess.run([sys.executable, "-m", "lorentzlab", "run", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for name in CSV_SCHEMAS:
        assert name in res.stdout
