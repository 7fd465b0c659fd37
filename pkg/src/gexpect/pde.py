"""Explicit finite-difference solver for the semilinear terminal-value problem

    u_t + b u_x + 1/2 sigma^2 u_xx + g(t, u, sigma u_x) = 0,   u(T, x) = Phi(x)

on a one-dimensional state grid.  Time stepping runs backward from T with the
coefficients frozen at the left end of every substep.  The edge nodes use a
mirrored ghost node (zero slope), which keeps every stencil weight nonnegative
so the scheme stays monotone and range-preserving.  Model time nodes are always
solver nodes; each model interval is cut into CFL-admissible substeps.

Claims with jumps are bracketed: each unit jump is replaced by the mollified
indicators on either side, the two smooth problems are solved, and the
midpoint is reported with the half-width as error bar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .claims import MollifiedIndicator, TerminalClaim
from .errors import ConfigurationError, NumericalError, UnsupportedConfiguration
from .generators import GeneratorSpec
from .report import write_csv
from .sde import CoefficientField, TimeGrid

CFL_SAFETY = 0.9
DOMAIN_WIDTH = 6.0
DEFAULT_NX = 801
DEFAULT_EPS_FACTOR = 0.5


# ---------------------------------------------------------------------------
# compiled kernel


@numba.njit(cache=True)
def _g_base(kind, p0, z):
    if kind == 1:
        return p0 * z
    if kind == 2:
        return p0 * abs(z)
    if kind == 3:
        return p0 * max(z, 0.0)
    if kind == 4:
        return math.sqrt(p0 * p0 + z * z) - p0
    return 0.0


@numba.njit(cache=True)
def _g(kind, base, p0, p1, y, z):
    if kind == 5:
        return _g_base(base, p0, z) * (1.0 + 0.5 * math.sin(p1 * y)) / 1.5
    return _g_base(kind, p0, z)


@numba.njit(cache=True)
def _advance(u, work, x, dx, dts, ba, bb, sa, sb, kinds, bases, p0s, p1s):
    """Run the substeps in order; u (rows, nx) is overwritten in place."""
    rows, nx = u.shape
    inv_dx = 1.0 / dx
    inv_dx2 = inv_dx * inv_dx
    for s in range(dts.shape[0]):
        dt = dts[s]
        kind = kinds[s]
        base = bases[s]
        p0 = p0s[s]
        p1 = p1s[s]
        for r in range(rows):
            ur = u[r]
            wr = work[r]
            for i in range(nx):
                if i == 0:
                    d1 = 0.0
                    d2 = 2.0 * (ur[1] - ur[0]) * inv_dx2
                elif i == nx - 1:
                    d1 = 0.0
                    d2 = 2.0 * (ur[i - 1] - ur[i]) * inv_dx2
                else:
                    d1 = 0.5 * (ur[i + 1] - ur[i - 1]) * inv_dx
                    d2 = (ur[i + 1] - 2.0 * ur[i] + ur[i - 1]) * inv_dx2
                sig = sa[s] + sb[s] * x[i]
                drift = ba[s] + bb[s] * x[i]
                y = ur[i]
                wr[i] = y + dt * (0.5 * sig * sig * d2 + drift * d1 + _g(kind, base, p0, p1, y, sig * d1))
            for i in range(nx):
                ur[i] = wr[i]


def _advance_numpy(u, x, dx, dts, ba, bb, sa, sb, times, g):
    """Same scheme for generators without a compiled form (custom callables)."""
    for s in range(dts.shape[0]):
        d1 = np.empty_like(u)
        d2 = np.empty_like(u)
        d1[:, 1:-1] = (u[:, 2:] - u[:, :-2]) / (2 * dx)
        d2[:, 1:-1] = (u[:, 2:] - 2 * u[:, 1:-1] + u[:, :-2]) / dx**2
        d1[:, 0] = 0.0
        d1[:, -1] = 0.0
        d2[:, 0] = 2 * (u[:, 1] - u[:, 0]) / dx**2
        d2[:, -1] = 2 * (u[:, -2] - u[:, -1]) / dx**2
        sig = sa[s] + sb[s] * x
        drift = ba[s] + bb[s] * x
        gz = g(times[s], u, (sig * d1)[..., None])
        u = u + dts[s] * (0.5 * sig * sig * d2 + drift * d1 + gz)
    return u


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Uniform space grid plus the model time grid and per-interval substeps.

    ``substeps[m]`` is the number of explicit steps used on model interval m.
    ``cfl`` records, per interval, the admissible substep and the one used.
    """

    x_min: float
    x_max: float
    nx: int
    time: TimeGrid
    substeps: tuple = ()
    cfl: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.nx < 5:
            raise ConfigurationError("space grid needs nx >= 5")
        if not self.x_max > self.x_min:
            raise ConfigurationError("space grid needs x_max > x_min")
        if self.substeps and len(self.substeps) != self.time.steps:
            raise ConfigurationError("substeps must have one entry per model interval")

    @property
    def dx(self):
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def x(self):
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def total_substeps(self):
        return int(sum(self.substeps))

    def with_nx(self, nx):
        return SpaceTimeGrid(self.x_min, self.x_max, nx, self.time)

    def to_dict(self):
        return {"x_min": self.x_min, "x_max": self.x_max, "nx": self.nx, "T": self.time.T,
                "steps": self.time.steps, "substeps": list(self.substeps)}


def _interval_bounds(coeff, g, grid, m):
    t0, t1 = grid.time.nodes[m], grid.time.nodes[m + 1]
    sig = coeff.sigma_bound(t0, t1, grid.x_min, grid.x_max)
    drift = coeff.drift_bound(grid.x_min, grid.x_max)
    return sig, drift, g.lipschitz_K2


def admissible_dt(sigma_max, drift_max, K2, dx, safety=CFL_SAFETY):
    denom = sigma_max**2 + K2 * sigma_max * dx + K2 * dx * dx + drift_max * dx
    return math.inf if denom == 0 else safety * dx * dx / denom


def certify(grid: SpaceTimeGrid, coeff: CoefficientField, g: GeneratorSpec, safety=CFL_SAFETY) -> SpaceTimeGrid:
    """Fill in substeps (or check the supplied ones) against the CFL bound."""
    dt_model = grid.time.dt
    substeps, cfl = [], []
    for m in range(grid.time.steps):
        sig, drift, k2 = _interval_bounds(coeff, g, grid, m)
        dt_adm = admissible_dt(sig, drift, k2, grid.dx, safety)
        if grid.substeps:
            k = int(grid.substeps[m])
            if k < 1 or dt_model / k > dt_adm * (1 + 1e-12):
                need = max(1, math.ceil(dt_model / dt_adm))
                raise ConfigurationError(
                    f"CFL violated on interval {m}: substep {dt_model / max(k, 1):.3e} exceeds admissible "
                    f"{dt_adm:.3e} (use at least {need} substeps)"
                )
        else:
            k = 1 if math.isinf(dt_adm) else max(1, math.ceil(dt_model / dt_adm - 1e-9))
        substeps.append(k)
        cfl.append((dt_adm, dt_model / k))
    return SpaceTimeGrid(grid.x_min, grid.x_max, grid.nx, grid.time, tuple(substeps), tuple(cfl))


def default_grid(coeff: CoefficientField, g: GeneratorSpec, x0: float, time: TimeGrid, nx: int = DEFAULT_NX,
                 width: float = DOMAIN_WIDTH) -> SpaceTimeGrid:
    """x0 +- (width * sqrt(int sigma^2) + |drift shift|), with x0 on the centre node."""
    if nx % 2 == 0:
        raise ConfigurationError("nx must be odd so that x0 is a grid node")
    nodes = time.nodes
    var = 0.0
    for m in range(time.steps):
        s = coeff.sigma_bound(nodes[m], nodes[m + 1], x0, x0)
        var += s * s * time.dt
    half = width * math.sqrt(var) + coeff.drift_bound(x0, x0) * time.T
    # keep a usable domain when the diffusion vanishes
    half = max(half, 1.0)
    return certify(SpaceTimeGrid(x0 - half, x0 + half, nx, time), coeff, g)


def _substep_schedule(coeff, g, grid, m):
    """Per-substep (dt, ba, bb, sa, sb, t) arrays on model interval m (left-frozen)."""
    k = grid.substeps[m]
    t0 = grid.time.nodes[m]
    dt = grid.time.dt / k
    times = t0 + dt * np.arange(k)
    ba, bb, sa, sb = (np.empty(k) for _ in range(4))
    probe = np.array([[0.0], [1.0]])
    for j, t in enumerate(times):
        b = coeff.b(t, probe)[:, 0]
        s = coeff.sigma(t, probe)[:, 0, 0]
        ba[j], bb[j] = b[0], b[1] - b[0]
        sa[j], sb[j] = s[0], s[1] - s[0]
    return np.full(k, dt), ba, bb, sa, sb, times


def _kernel_schedule(g, times):
    k = len(times)
    kinds = np.empty(k, dtype=np.int64)
    bases = np.empty(k, dtype=np.int64)
    p0s, p1s = np.empty(k), np.empty(k)
    for j, t in enumerate(times):
        kinds[j], bases[j], p0s[j], p1s[j] = g.kernel_params(t)
    return kinds, bases, p0s, p1s


def run_backward(coeff: CoefficientField, g: GeneratorSpec, terminal, grid: SpaceTimeGrid, keep_surface=False):
    """Propagate terminal rows (rows, nx) to t=0.

    Returns the (rows, nx) array at t=0, or (steps+1, rows, nx) when
    ``keep_surface`` is set.
    """
    if coeff.n != 1 or coeff.d != 1:
        raise UnsupportedConfiguration("the PDE backend supports n = d = 1 only; use the lsmc backend")
    if g.d != 1:
        raise UnsupportedConfiguration("generator dimension must be 1 for the PDE backend")
    if not grid.substeps:
        grid = certify(grid, coeff, g)
    u = np.array(terminal, dtype=float, ndmin=2, order="C")
    if u.shape[1] != grid.nx:
        raise ConfigurationError("terminal rows must have nx columns")
    x = grid.x
    compiled = g.kernel_params(0.0) is not None
    work = np.empty_like(u)
    steps = grid.time.steps
    surface = np.empty((steps + 1,) + u.shape) if keep_surface else None
    if keep_surface:
        surface[steps] = u
    for m in range(steps - 1, -1, -1):
        dts, ba, bb, sa, sb, times = _substep_schedule(coeff, g, grid, m)
        # backward in time: the last substep of the interval is applied first
        dts, ba, bb, sa, sb, times = (a[::-1].copy() for a in (dts, ba, bb, sa, sb, times))
        if compiled:
            kinds, bases, p0s, p1s = _kernel_schedule(g, times)
            _advance(u, work, x, grid.dx, dts, ba, bb, sa, sb, kinds, bases, p0s, p1s)
        else:
            u = _advance_numpy(u, x, grid.dx, dts, ba, bb, sa, sb, times, g)
        if not np.all(np.isfinite(u)):
            r, i = np.argwhere(~np.isfinite(u))[0]
            raise NumericalError(
                f"non-finite value at row {r}, node {i} (x={x[i]:.6g}) on interval starting t={grid.time.nodes[m]:.6g}"
            )
        if keep_surface:
            surface[m] = u
    return surface if keep_surface else u


# ---------------------------------------------------------------------------
# brackets for claims with jumps


def bracket_claims(claim: TerminalClaim, domain, eps: float):
    """(upper, lower) smooth claims with lower <= claim <= upper pointwise."""
    cont, jumps = claim.split(domain)
    if not jumps:
        return claim, claim
    up, lo = [cont], [cont]
    for xj, jump in jumps:
        hi_side = MollifiedIndicator(float(xj), eps, "lower")
        lo_side = MollifiedIndicator(float(xj), eps, "upper")
        up.append(jump * (hi_side if jump > 0 else lo_side))
        lo.append(jump * (lo_side if jump > 0 else hi_side))
    from .claims import Sum

    return Sum(tuple(up)), Sum(tuple(lo))


def _terminal_rows(claims, grid, eps):
    rows, index = [], []
    domain = (grid.x_min, grid.x_max)
    x = grid.x
    for claim in claims:
        if claim.is_continuous:
            index.append((len(rows), len(rows)))
            rows.append(claim(x))
        else:
            upper, lower = bracket_claims(claim, domain, eps)
            index.append((len(rows), len(rows) + 1))
            rows.append(upper(x))
            rows.append(lower(x))
    return np.asarray(rows, dtype=float), index


def _value_at(u0, grid, x0):
    j = (grid.nx - 1) // 2
    if abs(grid.x[j] - x0) <= 1e-12 * max(1.0, abs(x0)):
        return u0[:, j]
    return np.array([np.interp(x0, grid.x, row) for row in u0])


@dataclass
class PdeValues:
    value: np.ndarray
    error: np.ndarray
    half_width: np.ndarray
    richardson: np.ndarray
    grid: SpaceTimeGrid


def pde_values(coeff, g, claims, grid: SpaceTimeGrid, x0: float, eps_factor=DEFAULT_EPS_FACTOR, richardson=True,
               chunk=256):
    """u(0, x0) for many claims on one grid, with error estimates.

    error = bracket half-width + |u_h - u_2h| / 3, where u_2h reuses the same
    mollification radius on the coarse grid with (nx + 1) / 2 nodes.
    """
    claims = list(claims)
    eps = eps_factor * grid.dx
    fine = _solve_values(coeff, g, claims, grid, x0, eps, chunk)
    mid = 0.5 * (fine[:, 0] + fine[:, 1])
    half = 0.5 * np.abs(fine[:, 0] - fine[:, 1])
    rich = np.zeros(len(claims))
    if richardson:
        coarse_grid = certify(grid.with_nx((grid.nx + 1) // 2), coeff, g)
        coarse = _solve_values(coeff, g, claims, coarse_grid, x0, eps, chunk)
        rich = np.abs(mid - 0.5 * (coarse[:, 0] + coarse[:, 1])) / 3.0
    return PdeValues(mid, half + rich, half, rich, grid)


def _solve_values(coeff, g, claims, grid, x0, eps, chunk):
    out = np.empty((len(claims), 2))
    for start in range(0, len(claims), chunk):
        part = claims[start:start + chunk]
        rows, index = _terminal_rows(part, grid, eps)
        u0 = run_backward(coeff, g, rows, grid)
        vals = _value_at(u0, grid, x0)
        for k, (i, j) in enumerate(index):
            out[start + k] = (vals[i], vals[j])
    return out


# ---------------------------------------------------------------------------
# surfaces


@dataclass
class ValueSurface:
    """u and its spatial gradient at every model time node."""

    u: np.ndarray
    du: np.ndarray
    grid: SpaceTimeGrid
    x0: float
    coeff_id: str
    generator: str
    claim: str
    u_upper: np.ndarray | None = None
    u_lower: np.ndarray | None = None

    @property
    def x(self):
        return self.grid.x

    @property
    def value(self):
        return float(_value_at(self.u[0][None], self.grid, self.x0)[0])

    @property
    def half_width(self):
        if self.u_upper is None:
            return 0.0
        up = _value_at(self.u_upper[0][None], self.grid, self.x0)[0]
        lo = _value_at(self.u_lower[0][None], self.grid, self.x0)[0]
        return float(0.5 * abs(up - lo))

    def at(self, time_index, x):
        return np.interp(x, self.grid.x, self.u[time_index])

    def to_csv(self, path):
        t = self.grid.time.nodes
        rows = ((t[m], xi, self.u[m, i], self.du[m, i]) for m in range(len(t)) for i, xi in enumerate(self.x))
        meta = f"coeff={self.coeff_id} generator={self.generator} claim={self.claim}"
        write_csv(path, ["t", "x", "u", "du"], rows, comment=meta)


def solve_semilinear_pde(coeff: CoefficientField, g: GeneratorSpec, claim: TerminalClaim, grid: SpaceTimeGrid,
                         x0: float | None = None, eps_factor=DEFAULT_EPS_FACTOR) -> ValueSurface:
    """Full surface for one claim; claims with jumps give the bracket midpoint."""
    if x0 is None:
        x0 = 0.5 * (grid.x_min + grid.x_max)
    if not grid.substeps:
        grid = certify(grid, coeff, g)
    rows, _ = _terminal_rows([claim], grid, eps_factor * grid.dx)
    surf = run_backward(coeff, g, rows, grid, keep_surface=True)
    upper = lower = None
    if claim.is_continuous:
        u = surf[:, 0]
        u[-1] = claim(grid.x)
    else:
        upper, lower = surf[:, 0], surf[:, 1]
        u = 0.5 * (upper + lower)
        u[-1] = claim(grid.x)
    du = np.gradient(u, grid.dx, axis=1, edge_order=1)
    return ValueSurface(u, du, grid, float(x0), coeff.id, g.label, claim.label, upper, lower)


def extract_z_surface(surface: ValueSurface, coeff: CoefficientField):
    """z(t, x) = sigma(t, x) * du(t, x) on the model time nodes."""
    t = surface.grid.time.nodes
    x = surface.x[:, None]
    sig = np.stack([coeff.sigma(tm, x)[:, 0, 0] for tm in t])
    return sig * surface.du


@dataclass(frozen=True)
class GradientReport:
    min_gradient: float
    passed: bool
    location: tuple

    def to_dict(self):
        return {"min_gradient": self.min_gradient, "pass": self.passed, "t_index": self.location[0],
                "x_index": self.location[1]}


def gradient_sign_check(surface: ValueSurface, tol: float = 1e-6) -> GradientReport:
    """Pass iff du >= -tol on the whole surface (excluding the terminal layer of jump claims)."""
    du = surface.du if surface.u_upper is None else surface.du[:-1]
    k = int(np.argmin(du))
    loc = np.unravel_index(k, du.shape)
    m = float(du[loc])
    return GradientReport(m, m >= -tol, (int(loc[0]), int(loc[1])))
