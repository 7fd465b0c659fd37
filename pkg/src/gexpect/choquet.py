"""Choquet integrals against the capacity V_g(A) = E_g[1_A].

For a claim with values in [lo, hi]

    C_g[Phi] = int_{-inf}^0 (V(t) - 1) dt + int_0^inf V(t) dt = lo + int_lo^hi V(t) dt

with V(t) = V_g(Phi(X_T) >= t).  The integral is a composite midpoint rule.
Claims with finitely many values use the level-adapted rule: V is constant
between consecutive levels, so one midpoint per gap is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .claims import Affine, Constant, Step, SmoothMonotone, Sum, TerminalClaim, Clipped
from .errors import ConfigurationError, DomainError, PreconditionError
from .expectation import Model, SolverParams, capacities
from .generators import GeneratorSpec
from .report import write_csv

DEFAULT_K = 201


@dataclass(frozen=True)
class ThresholdQuadrature:
    """Midpoint rule on [lo, hi].

    ``uniform``: K equal cells.  ``adapted``: one cell per gap between the
    sorted ``levels`` (which must include lo and hi).
    """

    lo: float
    hi: float
    K: int = DEFAULT_K
    rule: str = "uniform"
    levels: tuple = ()

    def __post_init__(self):
        if self.rule not in ("uniform", "adapted"):
            raise ConfigurationError(f"unknown quadrature rule {self.rule!r}")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise DomainError("Choquet quadrature needs a bounded claim; clip it first (e.g. form 'clipped')")
        if self.hi < self.lo:
            raise ConfigurationError("quadrature needs lo <= hi")
        if self.rule == "uniform" and self.K < 3:
            raise ConfigurationError("uniform quadrature needs K >= 3")
        if self.rule == "adapted" and len(self.levels) < 1:
            raise ConfigurationError("adapted quadrature needs the claim's levels")

    @classmethod
    def for_claim(cls, claim: TerminalClaim, K: int = DEFAULT_K, rule: str = "auto"):
        lo, hi = claim.bounds
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise DomainError(f"claim {claim.label} is unbounded; Choquet integration needs a clipped claim")
        levels = claim.levels
        if rule == "auto":
            rule = "adapted" if levels is not None else "uniform"
        if rule == "adapted":
            if levels is None:
                raise ConfigurationError("adapted quadrature needs a claim with finitely many levels")
            return cls(float(lo), float(hi), max(len(levels) - 1, 0), "adapted", tuple(float(v) for v in levels))
        return cls(float(lo), float(hi), int(K), "uniform")

    @property
    def edges(self):
        if self.rule == "adapted":
            return np.asarray(self.levels, dtype=float)
        return np.linspace(self.lo, self.hi, self.K + 1)

    @property
    def thresholds(self):
        e = self.edges
        return 0.5 * (e[:-1] + e[1:])

    @property
    def widths(self):
        return np.diff(self.edges)

    def to_dict(self):
        out = {"lo": self.lo, "hi": self.hi, "rule": self.rule, "K": self.K}
        if self.rule == "adapted":
            out["levels"] = list(self.levels)
        return out


@dataclass
class ChoquetResult:
    value: float
    capacity_curve: np.ndarray  # (K, 3): t, V, err
    quadrature_error: float
    negative_part: float
    positive_part: float
    quad: ThresholdQuadrature
    backend: str

    def to_dict(self):
        return {"value": self.value, "quadrature_error": self.quadrature_error, "negative_part": self.negative_part,
                "positive_part": self.positive_part, "backend": self.backend, "quadrature": self.quad.to_dict()}

    def curve_csv(self, path):
        write_csv(path, ["t", "V", "err"], self.capacity_curve.tolist())


def integrate_curve(quad: ThresholdQuadrature, V, err):
    """(value, negative part, positive part, quadrature error) from a capacity curve."""
    edges = quad.edges
    w = np.diff(edges)
    V = np.asarray(V, dtype=float)
    err = np.asarray(err, dtype=float)
    below = np.clip(np.minimum(edges[1:], 0.0) - edges[:-1], 0.0, w)
    above = w - below
    value = quad.lo + float(np.sum(w * V))
    # V is 1 below lo and 0 above hi
    negative = float(np.sum(below * (V - 1.0))) + min(quad.hi, 0.0)
    positive = float(np.sum(above * V)) + max(quad.lo, 0.0)
    bar = float(np.sum(w * err))
    disc = 0.0
    if quad.rule == "uniform" and len(V) >= 3:
        h = w[0]
        if len(V) % 3 == 0:
            coarse = quad.lo + 3 * h * float(np.sum(V[1::3]))
            disc = abs(value - coarse) / 8.0
        else:
            tv = abs(1.0 - V[0]) + float(np.sum(np.abs(np.diff(V)))) + abs(V[-1])
            disc = 0.5 * h * tv
    return value, negative, positive, bar + disc


def choquet_integral(g: GeneratorSpec, claim: TerminalClaim, model: Model, quad: ThresholdQuadrature | None = None,
                     backend="pde", params: SolverParams | None = None) -> ChoquetResult:
    """C_g[Phi(X_T)] with one capacity solve per threshold on a shared grid / ensemble."""
    quad = quad or ThresholdQuadrature.for_claim(claim)
    t = quad.thresholds
    if t.size:
        V, err = capacities(g, claim, t, model, backend, params)
    else:
        V, err = np.empty(0), np.empty(0)
    value, neg, pos, qerr = integrate_curve(quad, V, err)
    curve = np.column_stack([t, V, err]) if t.size else np.empty((0, 3))
    return ChoquetResult(value, curve, qerr, neg, pos, quad, backend)


# ---------------------------------------------------------------------------
# properties


def comonotonic_check(claim_a: TerminalClaim, claim_b: TerminalClaim, sample_count: int = 1000,
                      domain=(-8.0, 8.0), tol: float = 1e-12) -> bool:
    """True iff (A(x) - A(x'))(B(x) - B(x')) >= 0 on all sampled pairs."""
    x = np.linspace(domain[0], domain[1], sample_count)
    a, b = claim_a(x), claim_b(x)
    prod = (a[:, None] - a[None, :]) * (b[:, None] - b[None, :])
    return bool(np.all(prod >= -tol))


@dataclass(frozen=True)
class PropertyCheck:
    name: str
    lhs: float
    rhs: float
    bound: float
    one_sided: bool = False  # only lhs <= rhs is required

    @property
    def defect(self):
        d = self.lhs - self.rhs
        return max(d, 0.0) if self.one_sided else abs(d)

    @property
    def passed(self):
        return self.defect <= self.bound

    def to_dict(self):
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "defect": self.defect, "bound": self.bound,
                "pass": self.passed}


def comonotonic_additivity_test(g, claim_a, claim_b, model, backend="pde", params=None, tol=1e-3,
                                K=DEFAULT_K) -> PropertyCheck:
    if not comonotonic_check(claim_a, claim_b):
        raise PreconditionError("comonotonic additivity needs comonotonic claims")
    both = Sum((claim_a, claim_b))
    ca = choquet_integral(g, claim_a, model, ThresholdQuadrature.for_claim(claim_a, K), backend, params)
    cb = choquet_integral(g, claim_b, model, ThresholdQuadrature.for_claim(claim_b, K), backend, params)
    cs = choquet_integral(g, both, model, ThresholdQuadrature.for_claim(both, K), backend, params)
    bound = tol + ca.quadrature_error + cb.quadrature_error + cs.quadrature_error
    return PropertyCheck("comonotonic_additivity", cs.value, ca.value + cb.value, bound)


def property_checks(g: GeneratorSpec, model: Model, backend="pde", params=None, K=DEFAULT_K, tol=1e-3):
    """Monotonicity, translation, positive homogeneity and comonotonic additivity."""
    base = SmoothMonotone()
    bigger = Sum((base, Affine(SmoothMonotone(center=1.0), 0.5, 0.5)))

    def C(claim):
        return choquet_integral(g, claim, model, ThresholdQuadrature.for_claim(claim, K), backend, params)

    c0 = C(base)
    c1 = C(bigger)
    out = []
    out.append(PropertyCheck("monotonicity", c0.value, c1.value, c0.quadrature_error + c1.quadrature_error + tol,
                             one_sided=True))
    for c in (-1.0, 1.0):
        r = C(Affine(base, 1.0, c))
        out.append(PropertyCheck(f"translation(c={c:g})", r.value, c0.value + c,
                                 r.quadrature_error + c0.quadrature_error + tol))
    for lam in (0.0, 0.5, 2.0):
        claim = Constant(0.0) if lam == 0 else Affine(base, lam, 0.0)
        r = C(claim)
        out.append(PropertyCheck(f"homogeneity(lambda={lam:g})", r.value, lam * c0.value,
                                 r.quadrature_error + lam * c0.quadrature_error + tol))
    out.append(comonotonic_additivity_test(g, Step((1.0,), (0.0,)), Step((1.0,), (0.5,)), model, backend, params,
                                           tol, K))
    return out


# ---------------------------------------------------------------------------
# truncation


@dataclass
class TruncationReport:
    levels: tuple
    errors: np.ndarray
    error_bars: np.ndarray
    reference: float

    @property
    def nonincreasing(self):
        e, b = self.errors, self.error_bars
        return bool(np.all(e[1:] <= e[:-1] + b[1:] + b[:-1]))

    @property
    def strictly_decreasing(self):
        return bool(np.all(np.diff(self.errors) < 0))

    def to_dict(self):
        return {"levels": list(self.levels), "errors": self.errors.tolist(), "error_bars": self.error_bars.tolist(),
                "reference": self.reference, "nonincreasing": self.nonincreasing}

    def to_csv(self, path):
        write_csv(path, ["N", "error", "error_bar"], zip(self.levels, self.errors, self.error_bars))


def truncation_convergence(g: GeneratorSpec, claim: TerminalClaim, levels, model: Model, reference: float = 6.0,
                           per_unit: int = 17, backend="pde", params=None) -> TruncationReport:
    """|C_g[(Phi ^ N) v (-N)] - C_g[(Phi ^ M) v (-M)]| for each N, M = ``reference``.

    Every truncation is integrated on one common threshold grid of width
    1/per_unit over [-M, M], so integer levels N fall on cell edges and a single
    capacity curve of Phi serves all of them: {clip_N(Phi) >= t} is {Phi >= t}
    for -N < t <= N, everything below -N and nothing above N.
    """
    levels = tuple(float(n) for n in levels)
    if any(n >= reference for n in levels) or list(levels) != sorted(levels):
        raise ConfigurationError("truncation levels must increase and stay below the reference level")
    K = int(round(2 * reference * per_unit))
    quad = ThresholdQuadrature(-reference, reference, K, "uniform")
    t = quad.thresholds
    clipped = Clipped(claim, -reference, reference)
    V, err = capacities(g, clipped, t, model, backend, params)
    w = quad.widths

    def clip_value(N):
        inside = (t > -N) & (t <= N)
        Vn = np.where(inside, V, np.where(t <= -N, 1.0, 0.0))
        en = np.where(inside, err, 0.0)
        return -reference + float(np.sum(w * Vn)), float(np.sum(w * en))

    ref_value, ref_err = clip_value(reference)
    errors, bars = [], []
    for N in levels:
        v, e = clip_value(N)
        errors.append(abs(v - ref_value))
        # the common curve cancels on (-N, N]; only the tails carry independent error
        bars.append(ref_err - e)
    return TruncationReport(levels, np.asarray(errors), np.asarray(bars), ref_value)
