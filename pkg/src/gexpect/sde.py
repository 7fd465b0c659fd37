"""Forward diffusion dX = b(t, X) dt + sigma(t, X) dW by Euler-Maruyama.

Random numbers are drawn from counter-based Philox streams keyed by
``(seed, block)``, where a block is a fixed run of ``BLOCK`` consecutive
paths.  Within a block the normals are drawn step-major, so path ``p``
depends only on ``(seed, p, steps, d)``: neither the number of paths nor the
number of workers changes it.
"""

from __future__ import annotations

import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InputError, NumericalError

BLOCK = 4096


def worker_count(requested=None):
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("GEXPECT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class TimeGrid:
    T: float
    steps: int

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigurationError("TimeGrid.steps must be >= 1")
        if not self.T > 0:
            raise ConfigurationError("TimeGrid.T must be > 0")

    @property
    def dt(self):
        return self.T / self.steps

    @property
    def nodes(self):
        return np.arange(self.steps + 1) * self.T / self.steps

    def index_of(self, t):
        """Index of grid node ``t``; off-grid times are rejected."""
        m = round(t * self.steps / self.T)
        if not 0 <= m <= self.steps or abs(m * self.T / self.steps - t) > 1e-9 * self.T:
            raise InputError(f"t={t} is not a node of the time grid (T={self.T}, steps={self.steps})")
        return m


# ---------------------------------------------------------------------------
# coefficient presets


@dataclass(frozen=True)
class Drift:
    kind: str = "zero"  # zero | constant | affine
    c: tuple = (0.0,)
    a: tuple = ((0.0,),)

    def to_dict(self):
        if self.kind == "zero":
            return {"kind": "zero"}
        if self.kind == "constant":
            return {"kind": "constant", "c": [float(v) for v in self.c]}
        return {"kind": "affine", "a": [list(map(float, r)) for r in self.a], "c": [float(v) for v in self.c]}


@dataclass(frozen=True)
class Diffusion:
    kind: str = "constant"  # constant | window | affine
    matrix: tuple = ((1.0,),)
    scale: float = 1.0
    t0: float = 0.0
    t1: float = 0.0
    s0: float = 0.0
    s1: float = 0.0

    def to_dict(self):
        if self.kind == "constant":
            return {"kind": "constant", "matrix": [list(map(float, r)) for r in self.matrix]}
        if self.kind == "window":
            return {"kind": "window", "scale": self.scale, "t0": self.t0, "t1": self.t1}
        return {"kind": "affine", "s0": self.s0, "s1": self.s1}


def _as_matrix(value, rows, cols):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return arr * np.eye(rows, cols)
    return arr.reshape(rows, cols)


@dataclass(frozen=True)
class CoefficientField:
    """Drift and diffusion of the forward equation.

    ``lipschitz_K1`` defaults to the exact constant of the presets.
    """

    drift: Drift = field(default_factory=Drift)
    diffusion: Diffusion = field(default_factory=Diffusion)
    n: int = 1
    d: int = 1
    lipschitz_K1: float | None = None

    def __post_init__(self):
        dr, df = self.drift, self.diffusion
        if dr.kind not in ("zero", "constant", "affine"):
            raise ConfigurationError(f"unknown drift preset {dr.kind!r}")
        if df.kind not in ("constant", "window", "affine"):
            raise ConfigurationError(f"unknown diffusion preset {df.kind!r}")
        if dr.kind != "zero" and np.asarray(dr.c).size != self.n:
            raise ConfigurationError(f"drift.c must have length n={self.n}")
        if dr.kind == "affine" and np.asarray(dr.a).size not in (1, self.n * self.n):
            raise ConfigurationError("drift.a must be a scalar or an n x n matrix")
        if df.kind == "constant" and np.asarray(df.matrix).size != self.n * self.d:
            raise ConfigurationError(f"diffusion.matrix must be {self.n} x {self.d}")
        if df.kind == "window" and not df.t1 > df.t0:
            raise ConfigurationError("diffusion window needs t1 > t0")
        if df.kind == "affine" and self.n != self.d:
            raise ConfigurationError("affine diffusion needs n == d")
        if self.lipschitz_K1 is None:
            k = 0.0
            if dr.kind == "affine":
                k += float(np.linalg.norm(_as_matrix(dr.a, self.n, self.n), 2))
            if df.kind == "affine":
                k += abs(df.s1)
            object.__setattr__(self, "lipschitz_K1", k)

    # -- constructors -----------------------------------------------------
    @classmethod
    def standard(cls, sigma=1.0, n=1, d=1):
        return cls(Drift(), Diffusion("constant", matrix=tuple(map(tuple, _as_matrix(sigma, n, d)))), n, d)

    @classmethod
    def brownian_window(cls, scale, t0, t1):
        """b = 0, sigma(s) = scale on [t0, t1), zero elsewhere."""
        return cls(Drift(), Diffusion("window", scale=float(scale), t0=float(t0), t1=float(t1)))

    @classmethod
    def gbm(cls, r, s):
        return cls(Drift("affine", a=((float(r),),), c=(0.0,)), Diffusion("affine", s0=0.0, s1=float(s)))

    @classmethod
    def from_dict(cls, data, path="model"):
        data = dict(data)
        n = int(data.pop("n", 1))
        d = int(data.pop("d", 1))
        k1 = data.pop("lipschitz_K1", None)
        dr = dict(data.pop("drift", {"kind": "zero"}))
        df = dict(data.pop("diffusion", {"kind": "constant", "matrix": 1.0}))
        if data:
            raise ConfigurationError(f"{path}.{next(iter(data))}: unknown key")
        kind = dr.pop("kind", "zero")
        allowed = {"zero": set(), "constant": {"c"}, "affine": {"a", "c"}}
        if kind not in allowed:
            raise ConfigurationError(f"{path}.drift.kind: unknown preset {kind!r}")
        for key in dr:
            if key not in allowed[kind]:
                raise ConfigurationError(f"{path}.drift.{key}: unknown key")
        c = tuple(np.broadcast_to(np.asarray(dr.get("c", 0.0), dtype=float), (n,)).tolist())
        a = tuple(map(tuple, _as_matrix(dr.get("a", 0.0), n, n)))
        drift = Drift(kind, c=c, a=a)
        kind = df.pop("kind", "constant")
        allowed = {"constant": {"matrix", "value"}, "window": {"scale", "t0", "t1"}, "affine": {"s0", "s1"}}
        if kind not in allowed:
            raise ConfigurationError(f"{path}.diffusion.kind: unknown preset {kind!r}")
        for key in df:
            if key not in allowed[kind]:
                raise ConfigurationError(f"{path}.diffusion.{key}: unknown key")
        if kind == "constant":
            m = df.get("matrix", df.get("value", 1.0))
            diffusion = Diffusion("constant", matrix=tuple(map(tuple, _as_matrix(m, n, d))))
        elif kind == "window":
            diffusion = Diffusion("window", scale=float(df.get("scale", 1.0)), t0=float(df["t0"]), t1=float(df["t1"]))
        else:
            diffusion = Diffusion("affine", s0=float(df.get("s0", 0.0)), s1=float(df.get("s1", 0.0)))
        return cls(drift, diffusion, n, d, k1)

    def to_dict(self):
        return {
            "drift": self.drift.to_dict(),
            "diffusion": self.diffusion.to_dict(),
            "n": self.n,
            "d": self.d,
            "lipschitz_K1": self.lipschitz_K1,
        }

    @property
    def id(self):
        from .report import content_hash

        return content_hash(self.to_dict())

    # -- evaluation -------------------------------------------------------
    def b(self, t, x):
        """Drift at time ``t`` for states ``x`` of shape (..., n)."""
        x = np.asarray(x, dtype=float)
        dr = self.drift
        if dr.kind == "zero":
            return np.zeros_like(x)
        c = np.asarray(dr.c)
        if dr.kind == "constant":
            return np.broadcast_to(c, x.shape).copy()
        a = _as_matrix(dr.a, self.n, self.n)
        return x @ a.T + c

    def sigma(self, t, x):
        """Diffusion at time ``t`` for states (..., n); returns (..., n, d)."""
        x = np.asarray(x, dtype=float)
        df = self.diffusion
        shape = x.shape[:-1] + (self.n, self.d)
        if df.kind == "constant":
            return np.broadcast_to(np.asarray(df.matrix, dtype=float), shape).copy()
        if df.kind == "window":
            # half-open window so grid-aligned edges are counted once
            eps = 1e-12 * max(1.0, abs(df.t1))
            on = (df.t0 - eps <= t) & (t < df.t1 - eps)
            return np.broadcast_to(df.scale * float(on) * np.eye(self.n, self.d), shape).copy()
        vals = df.s0 + df.s1 * x  # (..., n) with n == d
        return vals[..., :, None] * np.eye(self.n)

    def sigma_bound(self, t0, t1, x_lo=None, x_hi=None):
        """Max operator norm of sigma over [t0, t1] (and the x box for affine)."""
        df = self.diffusion
        if df.kind == "constant":
            return float(np.linalg.norm(np.asarray(df.matrix, dtype=float), 2))
        if df.kind == "window":
            return abs(df.scale) if (t0 < df.t1 and t1 > df.t0) else 0.0
        lo = -1.0 if x_lo is None else x_lo
        hi = 1.0 if x_hi is None else x_hi
        return max(abs(df.s0 + df.s1 * lo), abs(df.s0 + df.s1 * hi))

    def drift_bound(self, x_lo=-1.0, x_hi=1.0):
        dr = self.drift
        if dr.kind == "zero":
            return 0.0
        vals = [np.linalg.norm(self.b(0.0, np.full((1, self.n), v))) for v in (x_lo, x_hi)]
        return float(max(vals))


def eval_coefficients(coeff: CoefficientField, t: float, x):
    """(b(t, x), sigma(t, x)) for a single state ``x`` of length n."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (coeff.n,):
        raise InputError(f"x must have length n={coeff.n}")
    return coeff.b(t, x[None])[0], coeff.sigma(t, x[None])[0]


# ---------------------------------------------------------------------------
# path simulation


@dataclass(frozen=True)
class PathEnsemble:
    """Immutable simulated paths.

    ``states`` has shape (n_paths, steps + 1, n) and ``increments`` shape
    (n_paths, steps, d).  With ``antithetic`` set, paths 2k and 2k+1 use
    opposite Brownian increments.
    """

    states: np.ndarray
    increments: np.ndarray
    grid: TimeGrid
    seed: int
    coeff_id: str
    x0: tuple
    antithetic: bool = False

    @property
    def n_paths(self):
        return self.states.shape[0]

    @property
    def terminal(self):
        return self.states[:, -1, :]


def _normals(seed, block, steps, d, count, antithetic):
    """Standard normals for one block: shape (count, steps, d), step-major draws."""
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, block], dtype=np.uint64)))
    if antithetic:
        half = rng.standard_normal((steps, BLOCK // 2, d))
        draws = np.empty((steps, BLOCK, d))
        draws[:, 0::2] = half
        draws[:, 1::2] = -half
    else:
        draws = rng.standard_normal((steps, BLOCK, d))
    return np.ascontiguousarray(draws[:, :count].transpose(1, 0, 2))


def euler_maruyama(coeff: CoefficientField, x0, grid: TimeGrid, increments, path_offset=0):
    """Run X_{m+1} = X_m + b dt + sigma dW_m over given increments (P, steps, d)."""
    increments = np.asarray(increments, dtype=float)
    P = increments.shape[0]
    if increments.shape[1:] != (grid.steps, coeff.d):
        raise InputError(f"increments must have shape (P, {grid.steps}, {coeff.d})")
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (coeff.n,))
    states = np.empty((P, grid.steps + 1, coeff.n))
    states[:, 0] = x0
    dt = grid.dt
    nodes = grid.nodes
    x = states[:, 0].copy()
    for m in range(grid.steps):
        t = nodes[m]
        sig = coeff.sigma(t, x)
        x = x + coeff.b(t, x) * dt + np.einsum("pij,pj->pi", sig, increments[:, m])
        if not np.all(np.isfinite(x)):
            bad = int(np.argmax(~np.all(np.isfinite(x), axis=1)))
            raise NumericalError(f"non-finite state on path {path_offset + bad} at step {m + 1}")
        states[:, m + 1] = x
    return states


def simulate_paths(
    coeff: CoefficientField,
    x0,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    antithetic: bool = False,
    workers: int | None = None,
) -> PathEnsemble:
    if n_paths < 1:
        raise ConfigurationError("n_paths must be >= 1")
    if antithetic and n_paths % 2:
        raise ConfigurationError("antithetic sampling needs an even number of paths")
    if not 0 <= int(seed) < 2**63:
        raise ConfigurationError("seed must be a non-negative 64-bit integer")
    x0 = tuple(np.broadcast_to(np.asarray(x0, dtype=float), (coeff.n,)).tolist())
    states = np.empty((n_paths, grid.steps + 1, coeff.n))
    incs = np.empty((n_paths, grid.steps, coeff.d))
    sqdt = np.sqrt(grid.dt)
    n_blocks = -(-n_paths // BLOCK)

    def run(block):
        lo = block * BLOCK
        hi = min(n_paths, lo + BLOCK)
        dw = sqdt * _normals(int(seed), block, grid.steps, coeff.d, hi - lo, antithetic)
        incs[lo:hi] = dw
        states[lo:hi] = euler_maruyama(coeff, x0, grid, dw, path_offset=lo)

    nw = min(worker_count(workers), n_blocks)
    if nw == 1:
        for b in range(n_blocks):
            run(b)
    else:
        with ThreadPoolExecutor(nw) as pool:
            list(pool.map(run, range(n_blocks)))
    states.setflags(write=False)
    incs.setflags(write=False)
    return PathEnsemble(states, incs, grid, int(seed), coeff.id, x0, antithetic)


# ---------------------------------------------------------------------------
# binary dump: little-endian header (n, d, steps, n_paths, seed as int64; T as
# float64) followed by states then increments, row-major float64.

_HEADER = struct.Struct("<5qd")


def save_ensemble(ens: PathEnsemble, path):
    n, d = ens.states.shape[2], ens.increments.shape[2]
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(n, d, ens.grid.steps, ens.n_paths, ens.seed, ens.grid.T))
        fh.write(np.ascontiguousarray(ens.states, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(ens.increments, dtype="<f8").tobytes())


def load_ensemble(path, coeff_id="", antithetic=False) -> PathEnsemble:
    with open(path, "rb") as fh:
        n, d, steps, n_paths, seed, T = _HEADER.unpack(fh.read(_HEADER.size))
        body = np.frombuffer(fh.read(), dtype="<f8")
    split = n_paths * (steps + 1) * n
    if body.size != split + n_paths * steps * d:
        raise InputError(f"{path}: payload size does not match header")
    states = body[:split].reshape(n_paths, steps + 1, n).astype(float)
    incs = body[split:].reshape(n_paths, steps, d).astype(float)
    states.setflags(write=False)
    incs.setflags(write=False)
    return PathEnsemble(states, incs, TimeGrid(T, steps), seed, coeff_id, tuple(states[0, 0]), antithetic)
