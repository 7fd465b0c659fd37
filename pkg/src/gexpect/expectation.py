"""g-expectations, conditional g-expectations and capacities on either backend."""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from . import lsmc, pde
from .claims import Event, TerminalClaim
from .errors import ConfigurationError, PreconditionError, UnsupportedConfiguration
from .generators import GeneratorSpec, check_h3
from .report import content_hash
from .sde import CoefficientField, TimeGrid, simulate_paths

BACKENDS = ("pde", "lsmc")


@dataclass(frozen=True)
class Model:
    """Forward coefficients, starting point and model time grid."""

    coeff: CoefficientField
    x0: float = 0.0
    time: TimeGrid = TimeGrid(1.0, 100)

    @classmethod
    def standard(cls, T=1.0, steps=100, sigma=1.0, x0=0.0):
        return cls(CoefficientField.standard(sigma), float(x0), TimeGrid(float(T), int(steps)))

    def to_dict(self):
        return {"coeff": self.coeff.to_dict(), "x0": self.x0, "T": self.time.T, "steps": self.time.steps}

    @property
    def id(self):
        return content_hash(self.to_dict())


@dataclass(frozen=True)
class SolverParams:
    nx: int = pde.DEFAULT_NX
    eps_factor: float = pde.DEFAULT_EPS_FACTOR
    richardson: bool = True
    n_paths: int = 100_000
    seed: int = 0
    antithetic: bool = True
    basis: str = "auto"  # auto | polynomial | hats
    degree: int = 4
    bins: int = 64

    def to_dict(self):
        return dict(self.__dict__)

    def for_backend(self, backend):
        """Only the fields that influence the given backend (for hashing)."""
        if backend == "pde":
            return {"nx": self.nx, "eps_factor": self.eps_factor, "richardson": self.richardson}
        return {"n_paths": self.n_paths, "seed": self.seed, "antithetic": self.antithetic, "basis": self.basis,
                "degree": self.degree, "bins": self.bins}


@dataclass(frozen=True)
class ExpectationResult:
    value: float
    error_estimate: float
    backend: str
    scenario: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {"value": self.value, "error_estimate": self.error_estimate, "backend": self.backend,
                "scenario_hash": self.scenario.get("hash", ""), "details": self.details}


@dataclass(frozen=True)
class EventSpec:
    """The terminal event {base(X_T) >= threshold}."""

    base: TerminalClaim
    threshold: float

    @property
    def claim(self):
        return Event(self.base, float(self.threshold))

    def trivial_value(self):
        """1 or 0 when the threshold lies outside the claim's range, else None."""
        lo, hi = self.base.bounds
        if self.threshold <= lo:
            return 1.0
        if self.threshold > hi:
            return 0.0
        return None


def _scenario(g, claim, model, backend, params):
    info = {"generator": g.to_dict(), "claim": claim.to_dict() if claim is not None else None,
            "model": model.to_dict(), "backend": backend, "params": params.for_backend(backend)}
    return {"generator": g.label, "claim": claim.label if claim is not None else "", "model": model.id,
            "backend": backend, "hash": content_hash(info)}


def check_generator(g: GeneratorSpec, T: float):
    if not g.satisfies_H3_by_construction and check_h3(g, T) > 1e-8:
        raise PreconditionError(f"generator {g.label} has g(t, y, 0) != 0; (H3) is required")


# ---------------------------------------------------------------------------
# path cache: capacity curves reuse one ensemble per (model, params)

_PATHS = OrderedDict()
_PATHS_MAX = 2


def ensemble_for(model: Model, params: SolverParams):
    key = (model.id, params.n_paths, params.seed, params.antithetic)
    if key in _PATHS:
        _PATHS.move_to_end(key)
        return _PATHS[key]
    ens = simulate_paths(model.coeff, model.x0, model.time, params.n_paths, params.seed, params.antithetic)
    _PATHS[key] = ens
    while len(_PATHS) > _PATHS_MAX:
        _PATHS.popitem(last=False)
    return ens


def clear_cache():
    _PATHS.clear()


def _basis(params, claims, n):
    if params.basis == "auto":
        if n == 1:
            return lsmc.RegressionBasis("hats", bins=params.bins)
        return lsmc.RegressionBasis("polynomial", degree=params.degree)
    return lsmc.RegressionBasis(params.basis, degree=params.degree, bins=params.bins)


def pde_grid(model: Model, g: GeneratorSpec, params: SolverParams):
    return pde.default_grid(model.coeff, g, model.x0, model.time, params.nx)


def evaluate_many(g: GeneratorSpec, claims, model: Model, backend="pde", params: SolverParams | None = None):
    """(values, errors, details) for a batch of claims sharing grid or paths.

    PDE errors are bracket half-width plus the Richardson term; LSMC errors
    are 3 standard errors.
    """
    params = params or SolverParams()
    claims = list(claims)
    if backend not in BACKENDS:
        raise ConfigurationError(f"unknown backend {backend!r}; choose pde or lsmc")
    check_generator(g, model.time.T)
    if not claims:
        return np.empty(0), np.empty(0), {}
    if backend == "pde":
        if model.coeff.n != 1 or model.coeff.d != 1:
            raise UnsupportedConfiguration("the pde backend needs n = d = 1; use --backend lsmc")
        grid = pde_grid(model, g, params)
        res = pde.pde_values(model.coeff, g, claims, grid, model.x0, params.eps_factor, params.richardson)
        details = {"nx": grid.nx, "dx": grid.dx, "substeps": grid.total_substeps, "half_width": res.half_width,
                   "richardson": res.richardson}
        return res.value, res.error, details
    ens = ensemble_for(model, params)
    vals, se, basis = lsmc.lsmc_values(ens, g, claims, _basis(params, claims, model.coeff.n), model.coeff)
    return vals, 3.0 * se, {"stderr": se, "basis": basis.to_dict(), "n_paths": ens.n_paths}


def _pick(details, k):
    out = {}
    for key, v in details.items():
        out[key] = float(v[k]) if isinstance(v, np.ndarray) else v
    return out


def g_expectation(g: GeneratorSpec, claim: TerminalClaim, model: Model, backend="pde",
                  params: SolverParams | None = None) -> ExpectationResult:
    """E_g[Phi(X_T)] = Y_0."""
    params = params or SolverParams()
    vals, errs, details = evaluate_many(g, [claim], model, backend, params)
    return ExpectationResult(float(vals[0]), float(errs[0]), backend, _scenario(g, claim, model, backend, params),
                             _pick(details, 0))


def capacity(g: GeneratorSpec, event: EventSpec, model: Model, backend="pde",
             params: SolverParams | None = None) -> ExpectationResult:
    """V_g(A) = E_g[1_A] for A = {Phi(X_T) >= t}."""
    params = params or SolverParams()
    trivial = event.trivial_value()
    claim = event.claim
    if trivial is not None:
        return ExpectationResult(trivial, 0.0, backend, _scenario(g, claim, model, backend, params), {"trivial": True})
    return g_expectation(g, claim, model, backend, params)


def capacities(g: GeneratorSpec, base: TerminalClaim, thresholds, model: Model, backend="pde",
               params: SolverParams | None = None):
    """V_g(base >= t) for each threshold; events outside the range cost no solve."""
    params = params or SolverParams()
    thresholds = np.asarray(thresholds, dtype=float)
    vals = np.empty(thresholds.size)
    errs = np.zeros(thresholds.size)
    todo = []
    for k, t in enumerate(thresholds):
        triv = EventSpec(base, t).trivial_value()
        if triv is None:
            todo.append(k)
        else:
            vals[k] = triv
    if todo:
        v, e, _ = evaluate_many(g, [Event(base, float(thresholds[k])) for k in todo], model, backend, params)
        vals[todo] = v
        errs[todo] = e
    return vals, errs


@dataclass(frozen=True)
class ConditionalTable:
    """Tabulated x -> E_g[Phi(X_T) | X_t = x] at one time node."""

    t: float
    x: np.ndarray
    values: np.ndarray
    backend: str


def conditional_g_expectation(g: GeneratorSpec, claim: TerminalClaim, model: Model, t: float, backend="pde",
                              params: SolverParams | None = None) -> ConditionalTable:
    """PDE: u(t, .) on the space grid; LSMC: regression estimate at the simulated states."""
    params = params or SolverParams()
    m = model.time.index_of(t)
    check_generator(g, model.time.T)
    if backend == "pde":
        if model.coeff.n != 1:
            raise UnsupportedConfiguration("the pde backend needs n = d = 1; use --backend lsmc")
        grid = pde_grid(model, g, params)
        surf = pde.solve_semilinear_pde(model.coeff, g, claim, grid, model.x0, params.eps_factor)
        return ConditionalTable(float(t), grid.x, surf.u[m].copy(), "pde")
    if backend != "lsmc":
        raise ConfigurationError(f"unknown backend {backend!r}; choose pde or lsmc")
    ens = ensemble_for(model, params)
    x = ens.states[:, m]
    if m == model.time.steps:
        return ConditionalTable(float(t), x[:, 0].copy(), claim(x[:, 0]), "lsmc")
    sol = lsmc.solve_bsde_lsmc(ens, g, claim, _basis(params, [claim], model.coeff.n), model.coeff)
    return ConditionalTable(float(t), x[:, 0].copy(), sol.conditional(m, x), "lsmc")

