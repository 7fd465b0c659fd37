"""High-resolution oracle run that freezes UNEQUAL margins into gexpect/data/margins.json.

For each default-matrix cell not already settled by theory the oracle computes
E_g and C_g on a fine grid (K=2001 for uniform thresholds).  A cell gets a
margin of half the oracle discrepancy when that discrepancy exceeds three
times the oracle's combined error.  The harness grid for the cell is the
coarsest candidate nx at which the frozen margin is actually resolved.

    python scripts/freeze_margins.py [--only NAME ...]
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import pathlib
import time
from dataclasses import replace

from gexpect.choquet import ThresholdQuadrature, choquet_integral
from gexpect.expectation import Model, SolverParams, g_expectation
from gexpect.verify import (ScenarioSpec, cell_key, expected_verdict, matrix_claims, matrix_generators,
                            verify_representation, UNEQUAL)

OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "gexpect" / "data" / "margins.json"
ORACLE_NX_UNIFORM = 1201
ORACLE_NX_ADAPTED = 6401
ORACLE_K = 2001
RESOLVE_FACTOR = 3.0
HARNESS_NX_UNIFORM = (801, 1601)
HARNESS_NX_ADAPTED = (801, 1601, 3201, 6401)


def oracle(g, claim, model):
    quad = ThresholdQuadrature.for_claim(claim, ORACLE_K)
    nx = ORACLE_NX_ADAPTED if quad.rule == "adapted" else ORACLE_NX_UNIFORM
    params = SolverParams(nx=nx)
    E = g_expectation(g, claim, model, "pde", params)
    C = choquet_integral(g, claim, model, quad, "pde", params)
    return nx, quad.rule, E, C


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--only", nargs="*", default=None)
    args = ap.parse_args(argv)
    model = Model.standard()
    cells = json.loads(OUT.read_text())["cells"] if OUT.exists() else {}
    for gname, g in matrix_generators().items():
        for cname, claim in matrix_claims().items():
            name = f"{gname}/{cname}"
            if args.only and name not in args.only:
                continue
            if expected_verdict(g, claim) == "equal":
                continue
            start = time.perf_counter()
            nx, rule, E, C = oracle(g, claim, model)
            disc = abs(E.value - C.value)
            combined = E.error_estimate + C.quadrature_error
            entry = {"name": name, "oracle_nx": nx, "oracle_K": ORACLE_K if rule == "uniform" else C.quad.K,
                     "E_g": E.value, "E_err": E.error_estimate, "C_g": C.value, "C_err": C.quadrature_error,
                     "discrepancy": disc, "combined_err": combined, "margin": None, "nx": None}
            if disc > RESOLVE_FACTOR * combined:
                entry["margin"] = 0.5 * disc
                base = ScenarioSpec(g, claim, model, "pde", margin=entry["margin"], name=name)
                for hnx in HARNESS_NX_ADAPTED if rule == "adapted" else HARNESS_NX_UNIFORM:
                    rep = verify_representation(replace(base, params=SolverParams(nx=hnx)))
                    if rep.verdict == UNEQUAL:
                        entry["nx"] = hnx
                        break
            entry["seconds"] = round(time.perf_counter() - start, 1)
            cells[cell_key(g, claim, model)] = entry
            print(json.dumps(entry), flush=True)
            OUT.write_text(json.dumps(_doc(cells), indent=2, sort_keys=True) + "\n")
    OUT.write_text(json.dumps(_doc(cells), indent=2, sort_keys=True) + "\n")


def _doc(cells):
    return {"generated": dt.date.today().isoformat(), "script": "scripts/freeze_margins.py",
            "oracle": {"nx_uniform": ORACLE_NX_UNIFORM, "nx_adapted": ORACLE_NX_ADAPTED, "K": ORACLE_K,
                       "resolve_factor": RESOLVE_FACTOR, "margin": "0.5 * oracle discrepancy"},
            "cells": cells}


if __name__ == "__main__":
    main()
