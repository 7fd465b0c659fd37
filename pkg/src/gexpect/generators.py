"""BSDE drivers g(t, y, z) and numerical probes of their structure.

Every preset satisfies g(t, y, 0) = 0 and is Lipschitz in (y, z).  The
catalogue is chosen so that each structural hypothesis (y-independence,
positive homogeneity, full homogeneity) can be switched off one at a time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .errors import ConfigurationError, InputError, SpecificationError

KINDS = ("zero", "linear", "abs", "pos_part", "smooth_nonhom", "y_modulated", "custom")

# integer codes shared with the compiled PDE kernel
KIND_CODES = {"zero": 0, "linear": 1, "abs": 2, "pos_part": 3, "smooth_nonhom": 4, "y_modulated": 5}

# classification box: |y| <= Y_BOX, each z component in [-Z_BOX, Z_BOX], |lambda| <= LAMBDA_BOX
Y_BOX = 5.0
Z_BOX = 5.0
LAMBDA_BOX = 4.0


@dataclass(frozen=True)
class GeneratorSpec:
    """A driver preset.

    ``mu_schedule`` holds ``(t_start, mu)`` pairs for a piecewise-constant
    linear driver; before the first ``t_start`` the plain ``mu`` applies.
    ``func`` is only used by ``kind="custom"`` and never serialised.
    """

    kind: str
    kappa: float = 0.0
    mu: tuple[float, ...] = ()
    mu_schedule: tuple[tuple[float, tuple[float, ...]], ...] = ()
    beta: float = 0.0
    base: GeneratorSpec | None = None
    d: int = 1
    lipschitz_K2: float | None = None
    func: Callable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown generator kind {self.kind!r}; expected one of {KINDS}")
        if self.d < 1:
            raise ConfigurationError("generator dimension d must be >= 1")
        if self.kind in ("abs", "pos_part") and self.kappa < 0:
            raise ConfigurationError(f"{self.kind}: kappa must be >= 0")
        if self.kind == "smooth_nonhom" and self.kappa <= 0:
            raise ConfigurationError("smooth_nonhom: kappa must be > 0")
        if self.kind == "linear":
            mu = tuple(float(m) for m in self.mu) or (0.0,) * self.d
            if len(mu) != self.d:
                raise ConfigurationError(f"linear: mu has length {len(mu)}, expected d={self.d}")
            object.__setattr__(self, "mu", mu)
            sched = tuple(sorted((float(t0), tuple(float(m) for m in v)) for t0, v in self.mu_schedule))
            if any(len(v) != self.d for _, v in sched):
                raise ConfigurationError("linear: every mu_schedule entry needs length d")
            object.__setattr__(self, "mu_schedule", sched)
        if self.kind == "y_modulated":
            if self.base is None or self.base.kind in ("y_modulated", "custom"):
                raise ConfigurationError("y_modulated needs a y-independent preset as base")
            if self.base.d != self.d:
                object.__setattr__(self, "d", self.base.d)
        if self.kind == "custom" and (self.func is None or self.lipschitz_K2 is None):
            raise ConfigurationError("custom generator needs func and lipschitz_K2")
        if self.lipschitz_K2 is None:
            object.__setattr__(self, "lipschitz_K2", self._default_lipschitz())
        if self.lipschitz_K2 < 0:
            raise ConfigurationError("lipschitz_K2 must be >= 0")

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls, d=1):
        return cls("zero", d=d)

    @classmethod
    def linear(cls, mu, schedule=()):
        mu = tuple(np.atleast_1d(np.asarray(mu, dtype=float)).tolist())
        return cls("linear", mu=mu, mu_schedule=tuple(schedule), d=len(mu))

    @classmethod
    def abs(cls, kappa, d=1):
        return cls("abs", kappa=float(kappa), d=d)

    @classmethod
    def pos_part(cls, kappa, d=1):
        return cls("pos_part", kappa=float(kappa), d=d)

    @classmethod
    def smooth_nonhom(cls, kappa, d=1):
        return cls("smooth_nonhom", kappa=float(kappa), d=d)

    @classmethod
    def y_modulated(cls, base, beta):
        return cls("y_modulated", base=base, beta=float(beta), d=base.d)

    @classmethod
    def custom(cls, func, lipschitz_K2, d=1):
        return cls("custom", func=func, lipschitz_K2=float(lipschitz_K2), d=d)

    # -- serialisation ----------------------------------------------------
    def to_dict(self):
        out = {"kind": self.kind}
        if self.kind in ("abs", "pos_part", "smooth_nonhom"):
            out["kappa"] = self.kappa
        if self.kind == "linear":
            out["mu"] = list(self.mu)
            if self.mu_schedule:
                out["mu_schedule"] = [[t0, list(v)] for t0, v in self.mu_schedule]
        if self.kind == "y_modulated":
            out["base"] = self.base.to_dict()
            out["beta"] = self.beta
        if self.kind == "custom":
            out["func"] = getattr(self.func, "__qualname__", repr(self.func))
        out["d"] = self.d
        out["lipschitz_K2"] = self.lipschitz_K2
        return out

    @classmethod
    def from_dict(cls, data, path="generator"):
        data = dict(data)
        kind = data.pop("kind", None)
        if kind is None:
            raise ConfigurationError(f"{path}: missing required key 'kind'")
        allowed = {
            "zero": {"d", "lipschitz_K2"},
            "linear": {"mu", "mu_schedule", "d", "lipschitz_K2"},
            "abs": {"kappa", "d", "lipschitz_K2"},
            "pos_part": {"kappa", "d", "lipschitz_K2"},
            "smooth_nonhom": {"kappa", "d", "lipschitz_K2"},
            "y_modulated": {"base", "beta", "d", "lipschitz_K2"},
        }
        if kind not in allowed:
            raise ConfigurationError(f"{path}.kind: unknown generator {kind!r}")
        for key in data:
            if key not in allowed[kind]:
                raise ConfigurationError(f"{path}.{key}: unknown key for generator {kind!r}")
        if kind == "y_modulated":
            if "base" not in data:
                raise ConfigurationError(f"{path}.base: missing required key")
            base = cls.from_dict(data["base"], path + ".base")
            return cls("y_modulated", base=base, beta=float(data.get("beta", 1.0)), d=base.d)
        if kind == "linear":
            mu = data.get("mu", 0.0)
            mu = tuple(np.atleast_1d(np.asarray(mu, dtype=float)).tolist())
            sched = tuple((t0, tuple(np.atleast_1d(v).tolist())) for t0, v in data.get("mu_schedule", ()))
            return cls("linear", mu=mu, mu_schedule=sched, d=len(mu), lipschitz_K2=data.get("lipschitz_K2"))
        kwargs = {k: v for k, v in data.items()}
        if "kappa" in kwargs:
            kwargs["kappa"] = float(kwargs["kappa"])
        return cls(kind, **kwargs)

    @property
    def label(self):
        if self.kind in ("abs", "pos_part", "smooth_nonhom"):
            return f"{self.kind}(kappa={self.kappa:g})"
        if self.kind == "linear":
            return "linear(mu=" + ",".join(f"{m:g}" for m in self.mu) + ")"
        if self.kind == "y_modulated":
            return f"y_modulated({self.base.label},beta={self.beta:g})"
        return self.kind

    # -- evaluation -------------------------------------------------------
    def mu_at(self, t):
        """Linear coefficient at time(s) ``t``; shape ``t.shape + (d,)``."""
        t = np.asarray(t, dtype=float)
        mu = np.broadcast_to(np.asarray(self.mu), t.shape + (self.d,)).copy()
        if self.mu_schedule:
            starts = np.array([s for s, _ in self.mu_schedule])
            values = np.array([v for _, v in self.mu_schedule])
            idx = np.searchsorted(starts, t, side="right") - 1
            active = idx >= 0
            mu[active] = values[idx[active]]
        return mu

    def _base_value(self, t, z):
        kind = self.kind
        if kind == "zero":
            return np.zeros(z.shape[:-1])
        if kind == "linear":
            return np.sum(self.mu_at(t) * z, axis=-1)
        if kind == "abs":
            return self.kappa * np.linalg.norm(z, axis=-1)
        if kind == "pos_part":
            return self.kappa * np.linalg.norm(np.maximum(z, 0.0), axis=-1)
        if kind == "smooth_nonhom":
            return np.sqrt(self.kappa**2 + np.sum(z * z, axis=-1)) - self.kappa
        raise AssertionError(kind)

    def __call__(self, t, y, z):
        """Vectorised g(t, y, z); ``z`` carries the Brownian index on its last axis."""
        z = np.asarray(z, dtype=float)
        y = np.asarray(y, dtype=float)
        if z.shape[-1:] != (self.d,):
            raise InputError(f"z has trailing dimension {z.shape[-1:]} but generator has d={self.d}")
        t = np.broadcast_to(np.asarray(t, dtype=float), z.shape[:-1])
        if self.kind == "custom":
            return np.asarray(self.func(t, y, z), dtype=float)
        if self.kind == "y_modulated":
            return self.base._base_value(t, z) * (1.0 + 0.5 * np.sin(self.beta * y)) / 1.5
        return self._base_value(t, z)

    def kernel_params(self, t):
        """(kind, base_kind, p0, p1) for the compiled scalar kernel, or None."""
        if self.d != 1 or self.kind == "custom":
            return None
        if self.kind == "y_modulated":
            base = self.base
            p0 = float(base.mu_at(t)[0]) if base.kind == "linear" else base.kappa
            return KIND_CODES["y_modulated"], KIND_CODES[base.kind], p0, self.beta
        p0 = float(self.mu_at(t)[0]) if self.kind == "linear" else self.kappa
        return KIND_CODES[self.kind], KIND_CODES[self.kind], p0, 0.0

    def _default_lipschitz(self):
        if self.kind == "zero":
            return 0.0
        if self.kind == "linear":
            mus = [self.mu] + [v for _, v in self.mu_schedule]
            return float(max(np.linalg.norm(m) for m in mus))
        if self.kind in ("abs", "pos_part"):
            return self.kappa
        if self.kind == "smooth_nonhom":
            return 1.0
        if self.kind == "y_modulated":
            # z-slope is K_base; y-slope is K_base*beta*|z|/3, bounded on the classification box
            kb = self.base.lipschitz_K2
            return kb * max(1.0, abs(self.beta) * Z_BOX * np.sqrt(self.d) / 3.0)
        raise AssertionError(self.kind)

    @property
    def satisfies_H3_by_construction(self):
        return self.kind != "custom"


def eval_generator(g: GeneratorSpec, t: float, y: float, z) -> float:
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape != (g.d,):
        raise InputError(f"z must have length d={g.d}, got shape {z.shape}")
    return float(g(t, y, z))


@dataclass(frozen=True)
class GeneratorProperties:
    independent_of_y: bool
    positively_homogeneous: bool
    fully_homogeneous: bool
    max_violation: float
    violations: dict = field(default_factory=dict)


def _sobol(dim, n, seed):
    sampler = qmc.Sobol(d=dim, scramble=True, seed=seed)
    m = int(np.ceil(np.log2(max(n, 2))))
    return sampler.random_base2(m)[:n]


def classify_generator(
    g: GeneratorSpec,
    sample_budget: int = 4096,
    tol: float = 1e-8,
    T: float = 1.0,
    z_max: float = Z_BOX,
    y_max: float = Y_BOX,
    lambda_max: float = LAMBDA_BOX,
    seed: int = 20240611,
) -> GeneratorProperties:
    """Sample (t, y, y', z, lambda) quasi-uniformly and test the three hypotheses.

    A sample passes a homogeneity test when
    ``|g(t,y,lam z) - lam g(t,y,z)| <= tol * (1 + |lam||z|)``.
    """
    if sample_budget < 100:
        raise ConfigurationError("sample_budget must be >= 100")
    d = g.d
    u = _sobol(3 + d + 1, sample_budget, seed)
    t = u[:, 0] * T
    y = (2 * u[:, 1] - 1) * y_max
    y2 = (2 * u[:, 2] - 1) * y_max
    z = (2 * u[:, 3:3 + d] - 1) * z_max
    lam = (2 * u[:, 3 + d] - 1) * lambda_max
    # the unit cases used in textbook counterexamples are always included
    t = np.concatenate([t, [0.0, 0.0]])
    y = np.concatenate([y, [0.0, 0.0]])
    y2 = np.concatenate([y2, [1.0, 1.0]])
    unit = np.zeros((2, d))
    unit[:, 0] = 1.0
    z = np.concatenate([z, unit])
    lam = np.concatenate([lam, [-1.0, 2.0]])

    gz = g(t, y, z)
    glz = g(t, y, lam[:, None] * z)
    pos_lam = np.abs(lam)
    gplz = g(t, y, pos_lam[:, None] * z)
    znorm = np.linalg.norm(z, axis=-1)

    pos_defect = np.abs(gplz - pos_lam * gz)
    full_defect = np.abs(glz - lam * gz)
    y_defect = np.abs(g(t, y2, z) - gz)
    scale = tol * (1.0 + pos_lam * znorm)

    positively = bool(np.all(pos_defect <= scale))
    fully = positively and bool(np.all(full_defect <= scale))
    independent = bool(np.all(y_defect <= tol))
    violations = {
        "positive_homogeneity": float(pos_defect.max()),
        "full_homogeneity": float(full_defect.max()),
        "y_dependence": float(y_defect.max()),
    }
    return GeneratorProperties(
        independent_of_y=independent,
        positively_homogeneous=positively,
        fully_homogeneous=fully,
        max_violation=max(violations.values()),
        violations=violations,
    )


def lipschitz_probe(g: GeneratorSpec, sample_budget: int = 4096, T: float = 1.0, seed: int = 7) -> float:
    """Largest sampled quotient |g(p) - g(p')| / (|y - y'| + |z - z'|).

    Pairs are drawn at several separations so that both global and local
    slopes are seen.  Exceeding the declared constant by more than 1% raises
    :class:`SpecificationError`.
    """
    if sample_budget < 100:
        raise ConfigurationError("sample_budget must be >= 100")
    d = g.d
    u = _sobol(2 + d + 1 + d, sample_budget, seed)
    t = u[:, 0] * T
    y = (2 * u[:, 1] - 1) * Y_BOX
    z = (2 * u[:, 2:2 + d] - 1) * Z_BOX
    dy_dir = 2 * u[:, 2 + d] - 1
    dz_dir = 2 * u[:, 3 + d:3 + 2 * d] - 1
    best = 0.0
    base = g(t, y, z)
    for h in (2.0, 0.3, 1e-2, 1e-4):
        y2 = np.clip(y + h * dy_dir, -Y_BOX, Y_BOX)
        z2 = np.clip(z + h * dz_dir, -Z_BOX, Z_BOX)
        sep = np.abs(y2 - y) + np.linalg.norm(z2 - z, axis=-1)
        ok = sep > 0
        q = np.abs(g(t, y2, z2) - base)[ok] / sep[ok]
        if q.size:
            best = max(best, float(q.max()))
    if best > 1.01 * g.lipschitz_K2 + 1e-12:
        raise SpecificationError(
            f"{g.label}: sampled Lipschitz quotient {best:.6g} exceeds declared K2={g.lipschitz_K2:.6g}"
        )
    return best


def check_h3(g: GeneratorSpec, T: float = 1.0, n: int = 257) -> float:
    """Largest |g(t, y, 0)| on a sample grid (zero for every preset)."""
    t = np.linspace(0.0, T, n)
    y = np.linspace(-Y_BOX, Y_BOX, n)
    tt, yy = np.meshgrid(t, y, indexing="ij")
    vals = g(tt.ravel(), yy.ravel(), np.zeros((tt.size, g.d)))
    return float(np.max(np.abs(vals)))
