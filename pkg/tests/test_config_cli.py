import json

import pytest

from gexpect.cli import main, run
from gexpect.config import config_from_dict, parse_config
from gexpect.errors import ConfigurationError


def _write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_minimal_config_defaults():
    cfg = parse_config("")
    assert cfg.backend.nx == 801 and cfg.quadrature.K == 201 and cfg.backend.n_paths == 100000
    assert cfg.hash == parse_config("{}").hash


@pytest.mark.parametrize("text, where", [
    ("sigma_typo: 1", "sigma_typo"),
    ("model: {steps: 0}", "model.steps"),
    ("backend: {nx: 800}", "backend.nx"),
    ("generator: {kind: abs, kapa: 1}", "generator.kapa"),
    ("claim: {form: step, levels: [1]}", "claim.thresholds"),
    ("model: {coefficients: {drift: {kind: wobble}}}", "drift.kind"),
])
def test_config_errors_name_the_key(text, where):
    with pytest.raises(ConfigurationError, match=where.replace(".", r"\.")):
        parse_config(text)


def test_json_accepted():
    cfg = parse_config(json.dumps({"generator": {"kind": "abs", "kappa": 0.5}, "claim": {"form": "two_bump"}}))
    assert cfg.build_generator().kappa == 0.5 and cfg.build_claim().l2 == 0.5


def test_expectation_of_constant(tmp_path, capsys):
    cfg = _write(tmp_path, "generator: {kind: smooth_nonhom, kappa: 1}\nclaim: {form: constant, c: 0.25}\n")
    assert main(["expectation", "--config", cfg, "--runs", str(tmp_path / "runs")]) == 0
    assert "E_g = 0.25 " in capsys.readouterr().out


def test_unbounded_choquet_exit_1(tmp_path, capsys):
    cfg = _write(tmp_path, "claim: {form: identity}\n")
    assert main(["choquet", "--config", cfg, "--runs", str(tmp_path / "runs")]) == 1
    assert "clip" in capsys.readouterr().err


def test_bad_config_exit_1(tmp_path):
    cfg = _write(tmp_path, "backend: {nx: 4}\n")
    assert main(["capacity", "--config", cfg, "--runs", str(tmp_path / "runs")]) == 1
    assert main(["capacity", "--config", str(tmp_path / "missing.yaml")]) == 1


def test_report_reproducible_and_cached(tmp_path):
    runs = tmp_path / "runs"
    cfg = config_from_dict({"generator": {"kind": "abs", "kappa": 0.5}, "claim": {"form": "indicator", "a": 0.0},
                            "backend": {"name": "lsmc", "n_paths": 4000}, "model": {"steps": 20}})
    status, out, _ = run("capacity", cfg, runs)
    first = (out / "report.json").read_bytes()
    report = json.loads(first)
    assert report["result"]["backend"] == "lsmc" and report["result"]["error_estimate"] > 0
    assert report["config_hash"] == cfg.hash
    status, out2, line = run("capacity", cfg, runs)
    assert out2 == out and line.startswith("cached")
    run("capacity", cfg, runs, force=True)
    assert (out / "report.json").read_bytes() == first
    assert (out / "meta.json").exists()


def test_choquet_writes_curve(tmp_path):
    runs = tmp_path / "runs"
    cfg = config_from_dict({"generator": {"kind": "abs", "kappa": 0.5}, "claim": {"form": "two_bump"}})
    status, out, _ = run("choquet", cfg, runs)
    rows = (out / "capacity_curve.csv").read_text().splitlines()
    assert status == 0 and rows[0] == "t,V,err" and len(rows) == 3


def test_verify_mismatch_exit_3(tmp_path):
    cfg = _write(tmp_path, "generator: {kind: linear, mu: 0.3}\nclaim: {form: two_bump}\n"
                           "verify: {expected: unequal}\n")
    assert main(["verify", "--config", cfg, "--runs", str(tmp_path / "runs")]) == 3


def test_verify_equal_exit_0(tmp_path):
    cfg = _write(tmp_path, "generator: {kind: linear, mu: 0.3}\nclaim: {form: two_bump}\n")
    assert main(["verify", "--config", cfg, "--runs", str(tmp_path / "runs")]) == 0


def test_matrix_subset_and_unknown_cell(tmp_path):
    cfg = _write(tmp_path, "matrix: {cells: [linear/two_bump, abs/tanh]}\nquadrature: {K: 51}\n")
    assert main(["matrix", "--config", cfg, "--runs", str(tmp_path / "runs")]) == 0
    (summary,) = (tmp_path / "runs").glob("*/summary.csv")
    assert len(summary.read_text().splitlines()) == 3
    bad = _write(tmp_path, "matrix: {cells: [nope/none]}\n", "bad.yaml")
    assert main(["matrix", "--config", bad, "--runs", str(tmp_path / "runs")]) == 1


def test_simulate_seed_override(tmp_path):
    cfg = _write(tmp_path, "backend: {n_paths: 1000}\nsimulate: {save_paths: true}\nmodel: {steps: 10}\n")
    runs = str(tmp_path / "runs")
    assert main(["simulate", "--config", cfg, "--runs", runs, "--seed", "5"]) == 0
    (rep,) = (tmp_path / "runs").glob("*/report.json")
    assert json.loads(rep.read_text())["result"]["seed"] == 5
    assert (rep.parent / "paths.bin").stat().st_size > 0
