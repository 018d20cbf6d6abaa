import json

import pandas as pd
import pytest

from app import build_config, build_parser, main, parse_grid, parse_points
from core.errors import ConfigurationError
from core.models import ExperimentKind, KernelAction
from core.services.export_service import sha256_of_json

BUMP = '{"kind": "bump", "width": 0.5}'


def test_parse_grid_range():
    assert parse_grid("2^-1..2^-4") == [0.5, 0.25, 0.125, 0.0625]
    assert parse_grid("2^-3..2^-2") == [0.125, 0.25]


def test_parse_grid_list():
    assert parse_grid("0.5, 2^-3,0.01") == [0.5, 0.125, 0.01]
    assert parse_grid(None) == []


@pytest.mark.parametrize("text", ["2^-1..4", "a,b", "2^x"])
def test_parse_grid_rejects_garbage(text):
    with pytest.raises(ConfigurationError):
        parse_grid(text)


def test_parse_points():
    assert parse_points("0,0.5, -1") == [0.0, 0.5, -1.0]
    with pytest.raises(ConfigurationError):
        parse_points("0,x")


def test_build_config_for_kernel_compare():
    args = build_parser().parse_args(["kernel", "compare", "--fn", BUMP, "--measure", "sym2", "--x", "0,0.5"])
    cfg = build_config(args)
    assert cfg.kind == ExperimentKind.KERNEL
    assert cfg.kernel_action == KernelAction.COMPARE
    assert cfg.eps_list[0] == 0.5 and cfg.eps_list[-1] == 2.0 ** -14
    assert cfg.x == [0.0, 0.5]


def test_measure_check_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "moments.csv"
    assert main(["measure", "check", "--measure", "sym2", "--out", str(out)]) == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["multiindex", "degree", "moment", "exact"]
    manifest = json.loads((tmp_path / "moments.manifest.json").read_text(encoding="utf-8"))
    assert manifest["config_hash"] == sha256_of_json(manifest["config"])
    assert all(check["passed"] for check in manifest["checks"])
    assert "PASS" in capsys.readouterr().out


def test_config_hash_is_deterministic(tmp_path):
    out = tmp_path / "moments.csv"
    hashes = []
    for _ in range(2):
        assert main(["measure", "check", "--measure", "sym1", "--out", str(out)]) == 0
        manifest = json.loads((tmp_path / "moments.manifest.json").read_text(encoding="utf-8"))
        hashes.append(manifest["config_hash"])
    assert hashes[0] == hashes[1]


def test_failed_check_exits_with_one(tmp_path):
    out = tmp_path / "moments.csv"
    assert main(["measure", "check", "--measure", "sym2", "--order", "2", "--out", str(out)]) == 1
    report = json.loads((tmp_path / "moments.error.json").read_text(encoding="utf-8"))
    assert report["exit_code"] == 1
    assert report["error"] == "AssertionFailed"


def test_precondition_error_exits_with_two(tmp_path, capsys):
    out = tmp_path / "cz.csv"
    code = main(["kernel", "compare", "--fn", BUMP, "--measure", "sym1", "--eps-grid", "2^-1..2^-3", "--out", str(out)])
    assert code == 2
    report = json.loads((tmp_path / "cz.error.json").read_text(encoding="utf-8"))
    assert report["error"] == "PreconditionError"
    assert json.loads(capsys.readouterr().out.strip().splitlines()[-1])["exit_code"] == 2
    assert not out.exists()


def test_unknown_measure_is_configuration_error(tmp_path):
    assert main(["measure", "check", "--measure", "triangle", "--out", str(tmp_path / "m.csv")]) == 2


def test_kernel_report_json(tmp_path):
    out = tmp_path / "report.json"
    assert main(["kernel", "report", "--measure", "sym2", "--out", str(out)]) == 0
    report = json.loads(out.read_text(encoding="utf-8"))
    assert report["passed"] is True


@pytest.mark.slow
def test_kernel_compare_acceptance(tmp_path):
    out = tmp_path / "cz.csv"
    assert main(["kernel", "compare", "--fn", BUMP, "--measure", "sym2", "--out", str(out)]) == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["x", "eps", "theta_tilde", "transform", "gap"]
    assert len(frame) == 17 * 14


@pytest.mark.slow
def test_theta_sweep_acceptance(tmp_path):
    out = tmp_path / "theta.csv"
    svg = tmp_path / "theta.svg"
    fn = '{"kind": "weierstrass", "b": 2.0, "alpha": 1.0}'
    args = ["theta", "--fn", fn, "--measure", "sym2", "--samples", "64", "--out", str(out), "--svg", str(svg)]
    assert main(args) == 0
    assert svg.read_text(encoding="utf-8").startswith("<?xml")


def test_measure_check_from_file(tmp_path):
    descriptor = tmp_path / "m.json"
    descriptor.write_text('{"dim":1,"atoms":[[[1],1.0],[[-1],1.0],[[0],-2.0]],"sphere":null}', encoding="utf-8")
    out = tmp_path / "moments.csv"
    assert main(["measure", "check", "--file", str(descriptor), "--order", "1", "--out", str(out)]) == 0
    assert list(pd.read_csv(out)["degree"]) == [0, 1]


def test_fn_check_from_file(tmp_path, capsys):
    descriptor = tmp_path / "f.json"
    descriptor.write_text('{"kind":"weierstrass","b":2.0,"alpha":0.5,"eval_tol":1e-10}', encoding="utf-8")
    out = tmp_path / "fn.csv"
    args = ["fn", "check", "--file", str(descriptor), "--m", "0", "--alpha", "0.5", "--ell", "1", "--out", str(out)]
    assert main(args) == 0
    assert list(pd.read_csv(out).columns) == ["h", "ratio"]
    assert "PASS membership_C0,0.5" in capsys.readouterr().out


def test_file_alias_fills_descriptor():
    args = build_parser().parse_args(["fn", "check", "--file", "f.json"])
    assert build_config(args).fn_path == "f.json"
    args = build_parser().parse_args(["measure", "check", "--file", "m.json"])
    assert build_config(args).measure_path == "m.json"


def test_lil_theta_columns(tmp_path):
    out = tmp_path / "lil.csv"
    svg = tmp_path / "lil.svg"
    fn = '{"kind": "weierstrass", "b": 2.0, "alpha": 0.5}'
    args = ["lil", "--mode", "theta", "--fn", fn, "--measure", "sym1", "--alpha", "0.5"]
    args += ["--x", "0.1,0.4", "--nmin", "4", "--nmax", "6", "--out", str(out), "--svg", str(svg)]
    assert main(args) == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["x", "n", "eps", "theta", "ratio", "running_max"]
    assert len(frame) == 2 * 3
    assert (frame["eps"] == 2.0 ** -frame["n"]).all()
    assert svg.read_text(encoding="utf-8").startswith("<?xml")


def test_lil_martingale_columns(tmp_path):
    out = tmp_path / "lil.csv"
    fn = '{"kind": "weierstrass", "b": 2.0, "alpha": 0.5}'
    args = ["lil", "--mode", "martingale", "--fn", fn, "--measure", "sym1", "--alpha", "0.5"]
    args += ["--x", "0.1,0.4", "--nmin", "3", "--nmax", "5", "--out", str(out)]
    assert main(args) == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["x", "n", "eps", "S", "ratio", "running_max"]
    assert (frame["eps"] == 2.0 ** -(frame["n"] + 2)).all()


def test_usage_error_is_reported(tmp_path, capsys):
    out = tmp_path / "moments.csv"
    assert main(["measure", "check", "--out", str(out)]) == 2
    report = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert report["error"] == "ConfigurationError"
    assert "--measure" in report["message"]
    assert json.loads((tmp_path / "moments.error.json").read_text(encoding="utf-8"))["exit_code"] == 2


def test_usage_error_without_out(capsys):
    assert main(["lil", "--mode", "weekly"]) == 2
    assert json.loads(capsys.readouterr().out.strip().splitlines()[-1])["exit_code"] == 2
