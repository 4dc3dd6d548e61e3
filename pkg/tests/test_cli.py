import dataclasses
import json
import subprocess
import sys

import pytest

from rank1lab import cli, lab


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_verify_single_case_pass(capsys, tmp_path):
    code, out, err = run(["verify-algebra", "--cases", "angle-product", "--budget", "512", "--out", str(tmp_path)],
                         capsys)
    assert code == cli.EXIT_OK
    data = json.loads((tmp_path / "campaign.json").read_text())
    assert list(data["cases"]) == ["angle-product"]
    assert (tmp_path / "summary.txt").read_text().strip() == cli.summarize(data)


def test_verify_stdout_json(capsys):
    code, out, _ = run(["verify-algebra", "--cases", "ll-bound", "--budget", "256"], capsys)
    assert code == 0 and json.loads(out)["budget"] == 256


def test_verify_violation_exit(capsys, tmp_path):
    code, _, err = run(["verify-algebra", "--cases", "z-bound-p", "--budget", "4096", "--out", str(tmp_path)], capsys)
    assert code == cli.EXIT_VIOLATION
    assert "witness z-bound-p" in err
    recs = json.loads((tmp_path / "violations.json").read_text())
    assert recs and recs[0]["lemma"] == "z-bound-p"


def test_verify_precondition_exit(capsys, monkeypatch):
    reg = lab.default_registry()
    bad = dataclasses.replace(reg["ll-bound"], sampler=lab.shape_sampler("free"), complete=lab.complete_shape("free"))
    monkeypatch.setattr(lab, "default_registry", lambda: {"ll-bound": bad})
    code, _, _ = run(["verify-algebra", "--budget", "256"], capsys)
    assert code == cli.EXIT_PRECONDITION


@pytest.mark.parametrize("argv", [
    ["verify-algebra", "--cases", "no-such-case"],
    ["verify-algebra", "--budget", "0"],
    ["flow-sphere", "--space", "QQ,2", "--r0", "1"],
    ["flow-sphere", "--r0", "0"],
    ["flow-sphere", "--space", "OP,2", "--r0", "0.1"],
    ["flow-sphere", "--sweep", "r0=0.1:1.0"],
    ["flow-sphere", "--r0", "0.5", "--sweep", "r0=0.1:1:3"],
    ["pinch-scan", "--space", "CH,6", "--k", "2"],
    ["pinch-scan", "--space", "OP,2"],
    ["flow-curve", "--r0", "-1"],
    ["nonsense"],
    ["flow-sphere", "--format", "xml"],
])
def test_usage_errors(argv, capsys):
    code, _, _ = run(argv, capsys)
    assert code == cli.EXIT_USAGE


def test_flow_sphere_prints_bound(capsys):
    code, out, _ = run(["flow-sphere", "--space", "CH,2", "--r0", "1.0"], capsys)
    assert code == 0
    assert "bound r0/((n+1)d-2)=0.2500000000" in out
    T = float(out.split("T_collapse=")[1].split()[0])
    assert T <= 0.25


def test_flow_sphere_sweep_files_and_golden(capsys, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(["flow-sphere", "--sweep", "r0=0.1:1.0:10", "--out", str(d)], capsys)[0] == 0
    csvs = sorted(a.glob("sphere_*.csv"))
    assert len(csvs) == 10
    for f in a.iterdir():
        assert f.read_bytes() == (b / f.name).read_bytes()
    data = json.loads((a / "flow_sphere.json").read_text())
    code, out, _ = run(["report", str(a / "flow_sphere.json")], capsys)
    assert code == 0 and out.strip() == cli.summarize(data)
    man = json.loads(next(a.glob("*.manifest.json")).read_text())
    assert {"space", "params", "seed", "version"} <= set(man)


def test_flow_sphere_json_format(capsys, tmp_path):
    assert run(["flow-sphere", "--r0", "0.5", "--format", "json", "--out", str(tmp_path)], capsys)[0] == 0
    data = json.loads(next(tmp_path.glob("sphere_*_000.json")).read_text())
    assert data["manifest"]["collapsed"] is True


def test_pinch_scan(capsys, tmp_path):
    code, out, _ = run(["pinch-scan", "--space", "CH,2", "--r-min", "0.1", "--r-max", "1.0", "--points", "10",
                        "--out", str(tmp_path)], capsys)
    assert code == 0 and "r* = 0.49" in out
    data = json.loads((tmp_path / "pinch_scan.json").read_text())
    lo, hi = data["bracket"]
    assert lo < data["r_star"] < hi
    assert (tmp_path / "pinch_scan.csv").read_text().startswith("r,star_margin")


def test_pinch_scan_alpha_undefined(capsys):
    code, _, err = run(["pinch-scan", "--space", "OP,2", "--k", "2"], capsys)
    assert code == cli.EXIT_ALPHA and "alpha undefined" in err


def test_pinch_scan_small_spheres_cp2(capsys, tmp_path):
    code, _, _ = run(["pinch-scan", "--space", "CP,2", "--r-min", "0.001", "--r-max", "0.3", "--out",
                      str(tmp_path)], capsys)
    data = json.loads((tmp_path / "pinch_scan.json").read_text())
    assert code == 0 and data["r_star"] is None
    assert all(float(r["star_margin"]) > 0 for r in data["rows"])


def test_flow_curve(capsys, tmp_path):
    code, out, _ = run(["flow-curve", "--vertices", "64", "--stride", "2", "--t-end", "0.01", "--out",
                        str(tmp_path)], capsys)
    assert code == 0
    assert (tmp_path / "curve.csv").exists() and list(tmp_path.glob("curve_vertices_*.csv"))


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sphere run\nspace = CH,3\nr0 = 0.4\n")
    code, out, _ = run(["flow-sphere", "--config", str(cfg)], capsys)
    assert code == 0 and out.startswith("CH3 r0=0.4")
    code, out, _ = run(["flow-sphere", "--config", str(cfg), "--r0", "0.2"], capsys)
    assert out.startswith("CH3 r0=0.2")
    cfg.write_text(json.dumps({"space": "HH,2", "r0": 0.3}))
    code, out, _ = run(["flow-sphere", "--config", str(cfg)], capsys)
    assert code == 0 and out.startswith("HH2 r0=0.3")


@pytest.mark.parametrize("text", ["space = CH,2\nbogus = 1\n", '{"r0": 1, "colour": "red"}', "r0 = abc\n",
                                  "not a pair\n", "{broken"])
def test_config_rejected(text, capsys, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    code, _, err = run(["flow-sphere", "--config", str(cfg)], capsys)
    assert code == cli.EXIT_USAGE and "usage error" in err


def test_report_bad_file(capsys, tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{}")
    assert run(["report", str(p)], capsys)[0] == cli.EXIT_USAGE
    assert run(["report", str(tmp_path / "missing.json")], capsys)[0] == cli.EXIT_USAGE


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "rank1lab.cli", "verify-algebra", "--list"], capture_output=True,
                         text=True)
    assert out.returncode == 0 and "ll-bound" in out.stdout
