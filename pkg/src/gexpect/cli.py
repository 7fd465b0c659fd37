"""Command line: ``gexpect <command> --config FILE [--seed N] [--backend pde|lsmc] [--force]``.

Every run writes ``report.json`` (deterministic), ``meta.json`` (timing) and
CSV curves into ``<runs>/<hash>/`` where the hash covers the command and the
resolved config.  An existing report is reused unless ``--force``.

Exit status: 0 ok, 1 configuration, 2 numerical, 3 verdict mismatch.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .choquet import choquet_integral
from .config import RunConfig, config_from_dict, load_config
from .errors import ConfigurationError, GexpectError, NumericalError, VerdictMismatch
from .expectation import EventSpec, capacity, g_expectation
from .pde import solve_semilinear_pde
from .report import content_hash, write_csv, write_json
from .sde import save_ensemble, simulate_paths
from .verify import (ScenarioSpec, default_matrix, expected_verdict, frozen_margin, harness_nx, run_scenario_matrix,
                     verify_representation)

COMMANDS = ("simulate", "expectation", "capacity", "choquet", "verify", "matrix")


def _simulate(cfg: RunConfig, out: Path):
    model = cfg.build_model()
    b = cfg.backend
    ens = simulate_paths(model.coeff, model.x0, model.time, b.n_paths, b.seed, b.antithetic)
    x = ens.states[:, :, 0]
    mean, std = x.mean(axis=0), x.std(axis=0)
    write_csv(out / "moments.csv", ["t", "mean", "std"], zip(model.time.nodes, mean, std))
    if cfg.simulate.save_paths:
        save_ensemble(ens, out / "paths.bin")
    report = {"n_paths": ens.n_paths, "steps": model.time.steps, "seed": ens.seed, "coeff_id": ens.coeff_id,
              "terminal_mean": {"value": float(mean[-1]), "error_estimate": float(3 * std[-1] / np.sqrt(ens.n_paths)),
                                "backend": "sde"}}
    return report, f"terminal mean {mean[-1]:.6g} over {ens.n_paths} paths", 0


def _expectation(cfg: RunConfig, out: Path):
    model, g, claim, params = cfg.build_model(), cfg.build_generator(), cfg.build_claim(), cfg.build_params()
    res = g_expectation(g, claim, model, cfg.backend.name, params)
    if cfg.backend.name == "pde":
        from .expectation import pde_grid

        surf = solve_semilinear_pde(model.coeff, g, claim, pde_grid(model, g, params), model.x0, params.eps_factor)
        write_csv(out / "slice_t0.csv", ["x", "u"], zip(surf.grid.x, surf.u[0]))
    return res.to_dict(), f"E_g = {res.value:.6g} +/- {res.error_estimate:.2g} ({res.backend})", 0


def _capacity(cfg: RunConfig, out: Path):
    model, g, claim, params = cfg.build_model(), cfg.build_generator(), cfg.build_claim(), cfg.build_params()
    res = capacity(g, EventSpec(claim, cfg.capacity.threshold), model, cfg.backend.name, params)
    report = dict(res.to_dict(), threshold=cfg.capacity.threshold)
    return report, f"V_g = {res.value:.6g} +/- {res.error_estimate:.2g} ({res.backend})", 0


def _choquet(cfg: RunConfig, out: Path):
    model, g, claim, params = cfg.build_model(), cfg.build_generator(), cfg.build_claim(), cfg.build_params()
    res = choquet_integral(g, claim, model, cfg.build_quadrature(claim), cfg.backend.name, params)
    res.curve_csv(out / "capacity_curve.csv")
    return res.to_dict(), f"C_g = {res.value:.6g} +/- {res.quadrature_error:.2g} ({res.backend})", 0


def _verify(cfg: RunConfig, out: Path):
    model, g, claim, params = cfg.build_model(), cfg.build_generator(), cfg.build_claim(), cfg.build_params()
    margin = cfg.verify.margin if cfg.verify.margin is not None else frozen_margin(g, claim, model)
    expected = cfg.verify.expected
    if expected == "auto":
        expected = expected_verdict(g, claim, margin)
    nx = harness_nx(g, claim, model)
    if cfg.backend.name == "pde" and cfg.verify.margin is None and nx and nx > params.nx:
        params = replace(params, nx=nx)
    s = ScenarioSpec(g, claim, model, cfg.backend.name, cfg.quadrature.K, cfg.quadrature.rule, params, expected,
                     margin, "verify")
    rep = verify_representation(s)
    status = 0 if rep.match else VerdictMismatch.exit_code
    line = (f"{rep.verdict} (expected {expected}): E_g={rep.E:.6g} C_g={rep.C:.6g} "
            f"|diff|={rep.discrepancy:.3g} combined={rep.combined_err:.3g}")
    return dict(rep.to_dict(), status=status), line, status


def _matrix(cfg: RunConfig, out: Path):
    model, params = cfg.build_model(), cfg.build_params()
    cells = default_matrix(cfg.backend.name, model, params, cfg.quadrature.K)
    if cfg.matrix.cells != "default":
        wanted = set(cfg.matrix.cells)
        unknown = wanted - {s.name for s in cells}
        if unknown:
            raise ConfigurationError(f"matrix.cells: unknown cell(s) {sorted(unknown)}")
        cells = [s for s in cells if s.name in wanted]
    summary = run_scenario_matrix(cells)
    summary.write(out)
    for row in summary.rows():
        print(f"{row['generator']:>34} {row['claim']:>28} {row['verdict']:>12} expected={row['expected']:<13} "
              f"match={row['match']}")
    status = 0 if summary.passed else VerdictMismatch.exit_code
    report = {"cells": summary.rows(), "passed": summary.passed, "status": status}
    return report, f"{len(cells)} cells, {len(summary.mismatches)} mismatch(es)", status


HANDLERS = {"simulate": _simulate, "expectation": _expectation, "capacity": _capacity, "choquet": _choquet,
            "verify": _verify, "matrix": _matrix}


def build_parser():
    ap = argparse.ArgumentParser(prog="gexpect", description="g-expectations and Choquet integrals under g-capacities")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="YAML or JSON run configuration (defaults apply when omitted)")
    ap.add_argument("--seed", type=int, help="override backend.seed")
    ap.add_argument("--backend", choices=("pde", "lsmc"), help="override backend.name")
    ap.add_argument("--force", action="store_true", help="recompute even if the run directory exists")
    ap.add_argument("--runs", default="runs", help="parent directory of run directories (default: runs)")
    return ap


def resolve(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else config_from_dict({})
    data = cfg.to_dict()
    if args.seed is not None:
        data["backend"]["seed"] = args.seed
    if args.backend is not None:
        data["backend"]["name"] = args.backend
    return config_from_dict(data)


def run(command: str, cfg: RunConfig, runs="runs", force=False):
    """(exit status, run directory, summary line)."""
    key = content_hash({"command": command, "config": cfg.to_dict()})
    out = Path(runs) / key
    report_path = out / "report.json"
    if report_path.exists() and not force:
        report = json.loads(report_path.read_text())
        return int(report.get("status", 0)), out, f"cached {report.get('summary', '')}"
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    body, line, status = HANDLERS[command](cfg, out)
    report = {"command": command, "config": cfg.to_dict(), "config_hash": cfg.hash, "run": key, "result": body,
              "summary": line, "status": status}
    write_json(report_path, report)
    write_json(out / "meta.json", {"started": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
                                   "seconds": round(time.perf_counter() - start, 3), "version": __version__})
    return status, out, line


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
        status, out, line = run(args.command, cfg, args.runs, args.force)
    except GexpectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FloatingPointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return NumericalError.exit_code
    print(f"{args.command}: {line} [{out}]")
    return status


if __name__ == "__main__":
    sys.exit(main())
