"""Least-squares Monte Carlo backward induction for the BSDE

    Y_t = Phi(X_T) + int_t^T g(s, Y_s, Z_s) ds - int_t^T Z_s dW_s

on a simulated PathEnsemble.  Per step m, with P_m the regression onto the
basis evaluated at X_m,

    c_m = P_m[Y_{m+1}]
    Z_m = P_m[(Y_{m+1} - c_m) dW_m] / dt
    Y_m = c_m + P_m[g(t_m, Y_{m+1}, Z_m)] dt

Subtracting c_m before correlating with dW_m removes most of the variance
of the Z estimator without changing its conditional mean.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .claims import TerminalClaim
from .errors import ConfigurationError, InputError
from .generators import GeneratorSpec
from .report import write_csv
from .sde import CoefficientField, PathEnsemble

COND_LIMIT = 1e8
RIDGE = 1e-8
BOOTSTRAP = 200
TREE_BLOCK = 4096
SECTIONS = 10
MIN_SECTION = 1000


def _tree_sum(parts):
    """Pairwise reduction in a fixed order, independent of thread count."""
    parts = list(parts)
    while len(parts) > 1:
        nxt = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def _ridge_solve(A, rhs):
    cond = np.linalg.cond(A)
    ridge = False
    if not np.isfinite(cond) or cond > COND_LIMIT:
        tr = np.trace(A)
        if not tr > 0:
            raise ConfigurationError("regression basis is rank deficient even after regularisation")
        A = A + RIDGE * tr / A.shape[0] * np.eye(A.shape[0])
        ridge = True
    return np.linalg.solve(A, rhs), cond, ridge


class _Constant:
    """Intercept-only regression (deterministic state)."""

    cond = 1.0
    ridge = False

    def __init__(self, P):
        self.P = P

    def fit(self, T):
        return np.broadcast_to(T.mean(axis=0), T.shape).copy()

    def coef(self, T):
        return T.mean(axis=0)[None]


class _Dense:
    def __init__(self, D):
        self.D = D
        blocks = range(0, D.shape[0], TREE_BLOCK)
        A = _tree_sum(D[i:i + TREE_BLOCK].T @ D[i:i + TREE_BLOCK] for i in blocks)
        self.A = A
        self.cond = float(np.linalg.cond(A))
        self.ridge = False

    def coef(self, T):
        D = self.D
        rhs = _tree_sum(D[i:i + TREE_BLOCK].T @ T[i:i + TREE_BLOCK] for i in range(0, D.shape[0], TREE_BLOCK))
        beta, _, self.ridge = _ridge_solve(self.A, rhs)
        return beta

    def fit(self, T):
        return self.D @ self.coef(T)


class _Hats:
    def __init__(self, H):
        self.H = H.tocsr()
        self.Ht = H.T.tocsr()
        A = (self.Ht @ self.H).toarray()
        self.A = A
        self.cond = float(np.linalg.cond(A))
        self.ridge = False

    def coef(self, T):
        beta, _, self.ridge = _ridge_solve(self.A, self.Ht @ T)
        return beta

    def fit(self, T):
        return self.H @ self.coef(T)


@dataclass(frozen=True)
class RegressionBasis:
    """Polynomials of total degree ``degree`` or ``bins`` piecewise-linear hats.

    States are standardised per time step; hats cover +-``span`` standard
    deviations and states outside are clamped to the end hats.
    """

    kind: str = "polynomial"
    degree: int = 4
    bins: int = 64
    span: float = 4.0

    def __post_init__(self):
        if self.kind not in ("polynomial", "hats"):
            raise ConfigurationError(f"unknown basis kind {self.kind!r}")
        if self.degree < 1 or self.bins < 2:
            raise ConfigurationError("basis needs degree >= 1 and bins >= 2")

    @classmethod
    def for_claim(cls, claim: TerminalClaim, n: int = 1):
        """Hats in one dimension (local fits keep Z's sign near steep claims), polynomials otherwise."""
        return cls("hats") if n == 1 else cls("polynomial")

    def to_dict(self):
        if self.kind == "hats":
            return {"kind": "hats", "bins": self.bins, "span": self.span}
        return {"kind": "polynomial", "degree": self.degree}

    def standardise(self, x):
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        return mean, std

    def projector(self, x):
        x = np.asarray(x, dtype=float)
        P, n = x.shape
        mean, std = self.standardise(x)
        live = std > 1e-12 * (1.0 + np.abs(mean))
        if not live.any():
            return _Constant(P), (mean, std)
        s = np.zeros_like(x)
        s[:, live] = (x[:, live] - mean[live]) / std[live]
        if self.kind == "hats":
            if n != 1:
                raise ConfigurationError("the hat basis is one-dimensional; use polynomial for n > 1")
            return _Hats(self._hat_matrix(s[:, 0])), (mean, std)
        return _Dense(self._poly_matrix(s[:, live])), (mean, std)

    def _poly_matrix(self, s):
        cols = [np.ones(s.shape[0])]
        k = s.shape[1]
        for deg in range(1, self.degree + 1):
            for combo in itertools.combinations_with_replacement(range(k), deg):
                cols.append(np.prod(s[:, combo], axis=1))
        return np.column_stack(cols)

    def _hat_matrix(self, s):
        h = 2 * self.span / self.bins
        pos = (np.clip(s, -self.span, self.span) + self.span) / h
        j = np.minimum(np.floor(pos).astype(np.int64), self.bins - 1)
        f = pos - j
        P = s.shape[0]
        rows = np.repeat(np.arange(P), 2)
        cols = np.stack([j, j + 1], axis=1).ravel()
        vals = np.stack([1.0 - f, f], axis=1).ravel()
        return sp.coo_matrix((vals, (rows, cols)), shape=(P, self.bins + 1))

    def evaluate(self, x, mean, std, beta):
        """Regression function with stored standardisation and coefficients."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        live = std > 1e-12 * (1.0 + np.abs(mean))
        if not live.any():
            return np.broadcast_to(beta[0], (x.shape[0],) + beta.shape[1:]).copy()
        s = np.zeros_like(x)
        s[:, live] = (x[:, live] - mean[live]) / std[live]
        D = self._hat_matrix(s[:, 0]) if self.kind == "hats" else self._poly_matrix(s[:, live])
        return D @ beta


@dataclass
class BsdePathSolution:
    """Y (paths, nodes), Z (paths, steps, d) and the time-0 value."""

    Y0: float
    stderr_Y0: float
    Y: np.ndarray | None
    Z: np.ndarray | None
    basis: RegressionBasis
    regressions: list  # per step m: (mean, std, beta) for Y_m
    max_condition: float
    ridge_steps: int

    def conditional(self, m, x):
        mean, std, beta = self.regressions[m]
        return self.basis.evaluate(x, mean, std, beta)[..., 0]

    def to_csv(self, path, grid):
        rows = []
        for m, t in enumerate(grid.nodes):
            zc = self.Z[:, m].mean(axis=0) if (self.Z is not None and m < self.Z.shape[1]) else [float("nan")]
            rows.append([t, self.Y[:, m].mean(), self.Y[:, m].std(), *np.atleast_1d(zc)])
        d = 1 if self.Z is None else self.Z.shape[2]
        write_csv(path, ["t", "mean_Y", "std_Y"] + [f"mean_Z{k}" for k in range(d)], rows)


def _bootstrap_stderr(totals, antithetic, seed):
    """Bootstrap standard error of the column means of ``totals`` (P, R)."""
    units = 0.5 * (totals[0::2] + totals[1::2]) if antithetic else totals
    U = units.shape[0]
    if U < 2:
        return np.zeros(units.shape[1])
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0xB007], dtype=np.uint64)))
    means = np.empty((BOOTSTRAP, units.shape[1]))
    for b in range(BOOTSTRAP):
        w = np.bincount(rng.integers(0, U, U), minlength=U).astype(float)
        means[b] = w @ units / U
    return means.std(axis=0, ddof=1)


def _check(paths, coeff):
    if coeff is not None and coeff.id != paths.coeff_id:
        raise InputError(f"path ensemble was simulated under {paths.coeff_id}, not {coeff.id}")


def backward_induction(paths: PathEnsemble, g: GeneratorSpec, terminal, basis: RegressionBasis,
                       keep_paths=False):
    """Run the recursion for terminal columns (P, R).

    Returns (Y0 (R,), totals (P, R), Y, Z, regressions, max_cond, ridge_steps)
    where ``totals`` holds the pathwise Phi + sum g dt.  Y, Z and the
    regressions are kept only with ``keep_paths``.
    """
    terminal = np.asarray(terminal, dtype=float)
    if terminal.ndim == 1:
        terminal = terminal[:, None]
    P, R = terminal.shape
    grid = paths.grid
    M, dt = grid.steps, grid.dt
    dW = paths.increments
    d = dW.shape[2]
    if g.d != d:
        raise InputError(f"generator dimension {g.d} does not match Brownian dimension {d}")
    Y = terminal.copy()
    totals = terminal.copy()
    Ys = Zs = None
    regs = [None] * (M + 1)
    if keep_paths:
        Ys = np.empty((P, M + 1, R))
        Zs = np.empty((P, M, R, d))
        Ys[:, M] = Y
    max_cond, ridge_steps = 1.0, 0
    for m in range(M - 1, -1, -1):
        proj, (mean, std) = basis.projector(paths.states[:, m])
        c = proj.fit(Y)
        resid = Y - c
        target = (resid[:, :, None] * dW[:, m, None, :]).reshape(P, R * d)
        Z = (proj.fit(target) / dt).reshape(P, R, d)
        gv = g(grid.nodes[m], Y, Z) * dt
        totals += gv
        Y = c + proj.fit(gv)
        max_cond = max(max_cond, proj.cond)
        ridge_steps += int(proj.ridge)
        if keep_paths:
            Ys[:, m] = Y
            Zs[:, m] = Z
            regs[m] = (mean, std, proj.coef(Y))
    return Y[0].copy(), totals, Ys, Zs, regs, max_cond, ridge_steps


def _subset(paths: PathEnsemble, lo, hi):
    return PathEnsemble(paths.states[lo:hi], paths.increments[lo:hi], paths.grid, paths.seed, paths.coeff_id,
                        paths.x0, paths.antithetic)


def _stderr(paths, g, terminal, basis, totals):
    """max(bootstrap of pathwise totals, sectioning estimate).

    The bootstrap treats the fitted Z functions as fixed and so misses the
    regression noise; re-solving on SECTIONS disjoint blocks of paths captures
    both sources.
    """
    boot = _bootstrap_stderr(totals, paths.antithetic, paths.seed)
    P = terminal.shape[0]
    size = (P // SECTIONS) // 2 * 2
    if size < MIN_SECTION:
        return boot
    est = np.stack([
        backward_induction(_subset(paths, k * size, (k + 1) * size), g, terminal[k * size:(k + 1) * size], basis)[0]
        for k in range(SECTIONS)
    ])
    return np.maximum(boot, est.std(axis=0, ddof=1) / np.sqrt(SECTIONS))


def _terminal_values(claims, paths):
    xT = paths.terminal[:, 0]
    return np.column_stack([c(xT) for c in claims])


def solve_bsde_lsmc(paths: PathEnsemble, g: GeneratorSpec, claim: TerminalClaim, basis: RegressionBasis | None = None,
                    coeff: CoefficientField | None = None) -> BsdePathSolution:
    """Single-claim solve that keeps paths, Z and the regression functions.

    The claim is evaluated on the first state coordinate.
    """
    _check(paths, coeff)
    basis = basis or RegressionBasis.for_claim(claim, paths.states.shape[2])
    terminal = _terminal_values([claim], paths)
    Y0, totals, Ys, Zs, regs, cond, ridge = backward_induction(paths, g, terminal, basis, keep_paths=True)
    se = _stderr(paths, g, terminal, basis, totals)
    return BsdePathSolution(float(Y0[0]), float(se[0]), Ys[:, :, 0], Zs[:, :, 0, :], basis, regs, cond, ridge)


def lsmc_values(paths: PathEnsemble, g: GeneratorSpec, claims, basis: RegressionBasis | None = None,
                coeff: CoefficientField | None = None, chunk: int = 64):
    """Y0 and its standard error for many claims on one ensemble."""
    _check(paths, coeff)
    claims = list(claims)
    if basis is None:
        basis = RegressionBasis.for_claim(claims[0], paths.states.shape[2])
    vals, errs = np.empty(len(claims)), np.empty(len(claims))
    for start in range(0, len(claims), chunk):
        part = claims[start:start + chunk]
        terminal = _terminal_values(part, paths)
        Y0, totals, *_ = backward_induction(paths, g, terminal, basis)
        se = _stderr(paths, g, terminal, basis, totals)
        vals[start:start + len(part)] = Y0
        errs[start:start + len(part)] = se
    return vals, errs, basis


@dataclass(frozen=True)
class ZStructureReport:
    fraction_negative: float
    cells: int
    skipped: int
    status: str  # pass | fail | inconclusive

    def to_dict(self):
        return {"fraction_negative": self.fraction_negative, "cells": self.cells, "skipped": self.skipped,
                "status": self.status}


def z_structure_probe(solution: BsdePathSolution, paths: PathEnsemble, coeff: CoefficientField, tol: float = 1e-6,
                      sigma_threshold: float = 1e-8, max_fraction: float = 0.01) -> ZStructureReport:
    """Fraction of (path, step) cells with D = Z / sigma < -tol."""
    if coeff.n != 1 or coeff.d != 1:
        raise ConfigurationError("z_structure_probe needs n = d = 1")
    _check(paths, coeff)
    Z = solution.Z[:, :, 0]
    nodes = paths.grid.nodes
    sig = np.stack([coeff.sigma(nodes[m], paths.states[:, m])[:, 0, 0] for m in range(Z.shape[1])], axis=1)
    ok = np.abs(sig) > sigma_threshold
    total = ok.size
    used = int(ok.sum())
    if used <= total // 2:
        return ZStructureReport(0.0, used, total - used, "inconclusive")
    D = Z[ok] / sig[ok]
    frac = float(np.mean(D < -tol))
    return ZStructureReport(frac, used, total - used, "pass" if frac <= max_fraction else "fail")
