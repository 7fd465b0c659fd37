"""Scenario harness comparing E_g and C_g.

Verdict rule for one scenario, with combined = err(E_g) + err(C_g) and
tol_equal = 2 * combined + 1e-3:

* EQUAL        if |E_g - C_g| <= combined + tol_equal
* UNEQUAL      if |E_g - C_g| >= margin > combined
* INCONCLUSIVE otherwise

``margin`` is frozen per cell from a high-resolution oracle run (see
``data/margins.json``); cells without a frozen margin use
2 * (combined + tol_equal).
"""

from __future__ import annotations

import functools
import json
import time
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from .choquet import ThresholdQuadrature, choquet_integral
from .claims import (AbsValueClipped, Affine, Identity, IdentityClipped, MollifiedIndicator, SmoothMonotone, Step,
                     TerminalClaim, TwoBump, make_step_approximation, NONDECREASING)
from .errors import ConfigurationError, GexpectError
from .expectation import Model, SolverParams, evaluate_many, g_expectation
from .generators import GeneratorSpec, classify_generator
from .report import content_hash, write_csv, write_json
from .sde import CoefficientField, TimeGrid

EQUAL, UNEQUAL, INCONCLUSIVE = "EQUAL", "UNEQUAL", "INCONCLUSIVE"
TOL_ABS = 1e-3


def cell_key(g: GeneratorSpec, claim: TerminalClaim, model: Model) -> str:
    """Stable id of a (generator, claim, model) cell, independent of solver settings."""
    return content_hash({"generator": g.to_dict(), "claim": claim.to_dict(), "model": model.to_dict()})


@functools.lru_cache(maxsize=1)
def load_margins():
    try:
        text = resources.files("gexpect").joinpath("data/margins.json").read_text()
    except FileNotFoundError:
        return {}
    return json.loads(text).get("cells", {})


def frozen_margin(g, claim, model):
    return (load_margins().get(cell_key(g, claim, model)) or {}).get("margin")


def harness_nx(g, claim, model):
    """PDE grid at which the frozen margin of this cell is resolved, if any."""
    return (load_margins().get(cell_key(g, claim, model)) or {}).get("nx")


@dataclass(frozen=True)
class ScenarioSpec:
    generator: GeneratorSpec
    claim: TerminalClaim
    model: Model
    backend: str = "pde"
    K: int = 201
    rule: str = "auto"
    params: SolverParams = SolverParams()
    expected: str = "informational"  # equal | unequal | informational
    margin: float | None = None
    name: str = ""

    @property
    def key(self):
        return cell_key(self.generator, self.claim, self.model)

    @property
    def hash(self):
        return content_hash({"cell": self.key, "backend": self.backend, "K": self.K, "rule": self.rule,
                             "params": self.params.for_backend(self.backend), "expected": self.expected,
                             "margin": self.margin})

    def to_dict(self):
        return {"name": self.name, "generator": self.generator.to_dict(), "claim": self.claim.to_dict(),
                "model": self.model.to_dict(), "backend": self.backend, "K": self.K, "rule": self.rule,
                "params": self.params.for_backend(self.backend), "expected": self.expected, "margin": self.margin,
                "cell": self.key}


@dataclass
class VerificationReport:
    scenario: ScenarioSpec
    E: float
    E_err: float
    C: float
    C_err: float
    discrepancy: float
    combined_err: float
    tol_equal: float
    margin: float
    verdict: str
    runtime: float = field(default=0.0, compare=False)

    @property
    def match(self):
        exp = self.scenario.expected
        if exp == "informational":
            return True
        return self.verdict == exp.upper()

    def to_dict(self):
        return {"scenario": self.scenario.name, "scenario_hash": self.scenario.hash, "cell": self.scenario.key,
                "generator": self.scenario.generator.label, "claim": self.scenario.claim.label,
                "backend": self.scenario.backend, "E_g": self.E, "E_err": self.E_err, "C_g": self.C,
                "C_err": self.C_err, "discrepancy": self.discrepancy, "combined_err": self.combined_err,
                "tol_equal": self.tol_equal, "margin": self.margin, "verdict": self.verdict,
                "expected": self.scenario.expected, "match": self.match}


def decide(discrepancy, combined, margin=None):
    """(verdict, tol_equal, margin used)."""
    tol_equal = 2.0 * combined + TOL_ABS
    if margin is None:
        margin = 2.0 * (combined + tol_equal)
    if discrepancy <= combined + tol_equal:
        return EQUAL, tol_equal, margin
    if discrepancy >= margin > combined:
        return UNEQUAL, tol_equal, margin
    return INCONCLUSIVE, tol_equal, margin


def verify_representation(s: ScenarioSpec) -> VerificationReport:
    """E_g and C_g on the same grid (PDE) or ensemble (LSMC), then the verdict."""
    start = time.perf_counter()
    try:
        E = g_expectation(s.generator, s.claim, s.model, s.backend, s.params)
        quad = ThresholdQuadrature.for_claim(s.claim, s.K, s.rule)
        C = choquet_integral(s.generator, s.claim, s.model, quad, s.backend, s.params)
    except GexpectError as exc:
        raise type(exc)(f"[scenario {s.hash}] {exc}") from exc
    disc = abs(E.value - C.value)
    combined = E.error_estimate + C.quadrature_error
    margin = s.margin if s.margin is not None else frozen_margin(s.generator, s.claim, s.model)
    verdict, tol_equal, margin = decide(disc, combined, margin)
    return VerificationReport(s, E.value, E.error_estimate, C.value, C.quadrature_error, disc, combined, tol_equal,
                              margin, verdict, time.perf_counter() - start)


# ---------------------------------------------------------------------------
# theory prediction and the default matrix


def expected_verdict(g: GeneratorSpec, claim: TerminalClaim, margin=None) -> str:
    """'equal' where the representation is guaranteed, 'unequal' where a margin is frozen."""
    props = classify_generator(g)
    if props.independent_of_y and props.fully_homogeneous:
        return "equal"
    if props.independent_of_y and props.positively_homogeneous and claim.class_tag == NONDECREASING:
        return "equal"
    return "unequal" if margin is not None else "informational"


def matrix_generators():
    return {
        "linear": GeneratorSpec.linear(0.3),
        "abs": GeneratorSpec.abs(0.5),
        "pos_part": GeneratorSpec.pos_part(0.5),
        "smooth_nonhom": GeneratorSpec.smooth_nonhom(1.0),
        "y_modulated": GeneratorSpec.y_modulated(GeneratorSpec.abs(0.5), 1.0),
    }


def matrix_claims():
    return {
        "tanh": SmoothMonotone(),
        "step8": make_step_approximation(Affine(SmoothMonotone(), 0.5, 0.5), 8, 1.0),
        "mollified": MollifiedIndicator(0.0, 0.05, "lower"),
        "identity_clipped": IdentityClipped(6.0),
        "abs_value_clipped": AbsValueClipped(6.0),
        "two_bump": TwoBump(),
    }


def default_matrix(backend="pde", model: Model | None = None, params: SolverParams | None = None, K=201):
    model = model or Model.standard()
    params = params or SolverParams()
    out = []
    for gname, g in matrix_generators().items():
        for cname, claim in matrix_claims().items():
            margin = frozen_margin(g, claim, model)
            p = params
            nx = harness_nx(g, claim, model)
            if backend == "pde" and nx and nx > params.nx:
                p = replace(params, nx=nx)
            out.append(ScenarioSpec(g, claim, model, backend, K, "auto", p, expected_verdict(g, claim, margin),
                                    None, f"{gname}/{cname}"))
    return out


@dataclass
class MatrixSummary:
    reports: list

    @property
    def mismatches(self):
        return [r for r in self.reports if not r.match]

    @property
    def passed(self):
        return not self.mismatches

    def rows(self):
        return [r.to_dict() for r in sorted(self.reports, key=lambda r: r.scenario.hash)]

    def write(self, directory):
        write_json(f"{directory}/summary.json", {"cells": self.rows(), "passed": self.passed})
        cols = ["scenario_hash", "generator", "claim", "E_g", "C_g", "discrepancy", "verdict", "expected", "match"]
        write_csv(f"{directory}/summary.csv", cols, ([row[c] for c in cols] for row in self.rows()))


def run_scenario_matrix(matrix) -> MatrixSummary:
    return MatrixSummary([verify_representation(s) for s in matrix])


# ---------------------------------------------------------------------------
# additivity on nondecreasing claims


@dataclass(frozen=True)
class AdditivityReport:
    lhs: float
    rhs: float
    bound: float
    informational: bool

    @property
    def defect(self):
        return abs(self.lhs - self.rhs)

    @property
    def passed(self):
        return self.defect <= self.bound

    def to_dict(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "defect": self.defect, "bound": self.bound, "pass": self.passed,
                "informational": self.informational}


def verify_additivity(g: GeneratorSpec, claims, model: Model, tol=2e-3, backend="pde", params=None,
                      informational=False) -> AdditivityReport:
    """|E_g[sum phi_i] - sum E_g[phi_i]| against tol + solver errors."""
    claims = list(claims)
    props = classify_generator(g)
    if not informational:
        if not (props.independent_of_y and props.positively_homogeneous):
            raise ConfigurationError(f"additivity needs a y-independent positively homogeneous driver, got {g.label}")
        bad = [c.label for c in claims if c.class_tag != NONDECREASING or not c.is_continuous]
        if bad:
            raise ConfigurationError(f"additivity needs smooth nondecreasing claims: {', '.join(bad)}")
    from .claims import Sum

    total = Sum(tuple(claims))
    vals, errs, _ = evaluate_many(g, claims + [total], model, backend, params)
    return AdditivityReport(float(vals[-1]), float(np.sum(vals[:-1])), tol + float(np.sum(errs)), informational)


# ---------------------------------------------------------------------------
# necessity probes


def window_model(t: float, eps: float, scale: float = 1.0, x0: float = 0.0, dt: float = 0.01) -> Model:
    """X_s = x0 + scale (W_{s ^ T} - W_{t ^ s}) with T = t + eps: b = 0, sigma = scale on [t, T)."""
    T = t + eps
    steps = int(round(T / dt))
    if abs(steps * dt - T) > 1e-9 or abs(round(t / dt) * dt - t) > 1e-9:
        raise ConfigurationError("window edges must fall on the time grid")
    return Model(CoefficientField.brownian_window(scale, t, T), float(x0), TimeGrid(T, steps))


@dataclass
class BrownianProbeReport:
    rows: list
    tol: float

    @property
    def max_translation(self):
        return max((r["translation_defect"] for r in self.rows), default=0.0)

    @property
    def max_scaling(self):
        return max((r["scaling_defect"] for r in self.rows), default=0.0)

    @property
    def passed(self):
        return self.max_translation <= self.tol and self.max_scaling <= self.tol

    def to_dict(self):
        return {"rows": self.rows, "tol": self.tol, "max_translation": self.max_translation,
                "max_scaling": self.max_scaling, "pass": self.passed}


def necessity_probe_brownian(g: GeneratorSpec, ys=(-1.0, 0.5, 1.0), zs=(0.5, 1.0), lambdas=(0.0, 0.5, 1.0, 2.0),
                             t=0.5, eps=0.1, tol=2e-3, backend="pde", params=None) -> BrownianProbeReport:
    """Translation and scaling defects of E_g on xi = z (W_{t+eps} - W_t).

    translation: |E_g[xi + y] - E_g[xi] - y|; scaling: |E_g[lambda xi] - lambda E_g[xi]|.
    Both vanish whenever E_g = C_g on monotone claims.
    """
    rows = []
    for z in zs:
        model = window_model(t, eps, z)
        claims = [Identity()] + [Affine(Identity(), 1.0, y) for y in ys] + [Affine(Identity(), lam, 0.0)
                                                                            for lam in lambdas]
        vals, errs, _ = evaluate_many(g, claims, model, backend, params)
        base, base_err = vals[0], errs[0]
        for k, y in enumerate(ys):
            rows.append({"z": z, "y": y, "lambda": 1.0, "E": float(vals[1 + k]),
                         "translation_defect": float(abs(vals[1 + k] - base - y)), "scaling_defect": 0.0,
                         "error": float(errs[1 + k] + base_err)})
        for k, lam in enumerate(lambdas):
            v, e = vals[1 + len(ys) + k], errs[1 + len(ys) + k]
            rows.append({"z": z, "y": 0.0, "lambda": lam, "E": float(v), "translation_defect": 0.0,
                         "scaling_defect": float(abs(v - lam * base)), "error": float(e + lam * base_err)})
    return BrownianProbeReport(rows, tol)


INDICATOR_FAMILY = ((1.0, 0.0), (1.0, -0.5), (0.5, 0.5), (-1.0, 0.0), (0.0, 1.0), (1.0, 1.0))


def indicator_pair_claim(l1, l2, a, b) -> Step:
    """l1 1{x >= a} + l2 1{a <= x < b}."""
    return Step((l1 + l2, -l2), (a, b))


def necessity_probe_indicators(g: GeneratorSpec, t=0.25, T=1.0, a=0.0, b=0.5, family=INDICATOR_FAMILY,
                               backend="pde", params=None):
    """E_g vs C_g on l1 1{W_T - W_t >= a} + l2 1{a <= W_T - W_t < b}."""
    if not a < b:
        raise ConfigurationError("indicator probe needs a < b")
    model = window_model(t, T - t)
    out = []
    for l1, l2 in family:
        claim = indicator_pair_claim(l1, l2, a, b)
        s = ScenarioSpec(g, claim, model, backend, params=params or SolverParams(), name=f"l1={l1:g},l2={l2:g}")
        rep = verify_representation(s)
        out.append(rep)
    return out


def with_expected(matrix, mapping):
    """Copy of ``matrix`` with expected verdicts overridden by scenario name."""
    return [replace(s, expected=mapping.get(s.name, s.expected)) for s in matrix]
