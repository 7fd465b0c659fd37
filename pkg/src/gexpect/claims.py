"""Terminal claims Phi(x) for x in R.

Claims are small immutable objects that evaluate vectorised over numpy
arrays.  Besides pointwise evaluation each claim knows

* ``bounds``: an enclosure ``(lo, hi)`` of its range,
* ``class_tag``: its monotonicity class,
* ``split(domain)``: a decomposition into a continuous part plus unit jumps
  ``sum_j J_j 1{x >= x_j}``, which the PDE backend needs to bracket
  discontinuities by mollified indicators,
* ``levels``: the finite set of values it takes, when it is piecewise constant.

Claims compose: ``2 * phi + 1``, ``phi + psi`` and ``-phi`` build new claims.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from .errors import ConfigurationError, DomainError

NONDECREASING = "monotone_nondecreasing"
NONINCREASING = "monotone_nonincreasing"
NONMONOTONE = "measurable_nonmonotone"

_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)


def _bump(u):
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    v = u[inside]
    out[inside] = np.exp(-1.0 / (1.0 - v * v))
    return out


_BUMP_MASS = float(np.sum(_GL_W * _bump(_GL_X)))


def kernel_cdf(s):
    """CDF of the normalised mollifier exp(-1/(1-v^2)) on [-1, 1].

    Computed by 64-point Gauss-Legendre on [-1, -|s|]; the right half uses
    the symmetry K(s) = 1 - K(-s).
    """
    s = np.clip(np.asarray(s, dtype=float), -1.0, 1.0)
    left = -np.abs(s)
    half = 0.5 * (left + 1.0)
    nodes = -1.0 + half[..., None] * (_GL_X + 1.0)
    mass = half * np.sum(_GL_W * _bump(nodes), axis=-1) / _BUMP_MASS
    return np.where(s > 0, 1.0 - mass, mass)


def _direction_tag(direction):
    if direction is None:
        return NONMONOTONE
    return NONINCREASING if direction < 0 else NONDECREASING


class TerminalClaim:
    """Base class; subclasses are frozen dataclasses."""

    form: ClassVar[str] = ""

    def __call__(self, x):
        raise NotImplementedError

    # +1 nondecreasing, -1 nonincreasing, 0 constant, None neither
    @property
    def direction(self):
        raise NotImplementedError

    @property
    def class_tag(self):
        return _direction_tag(self.direction)

    @property
    def bounds(self):
        raise NotImplementedError

    @property
    def sup_norm(self):
        lo, hi = self.bounds
        return max(abs(lo), abs(hi))

    @property
    def is_bounded(self):
        return math.isfinite(self.sup_norm)

    @property
    def is_continuous(self):
        return True

    @property
    def levels(self):
        return None

    def split(self, domain):
        """(continuous part, ((x_j, J_j), ...)) with Phi = cont + sum J_j 1{x >= x_j}."""
        return self, ()

    def to_dict(self):
        raise NotImplementedError

    @property
    def label(self):
        return self.form

    # -- algebra ------------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, TerminalClaim):
            return Sum((self, other))
        return Affine(self, 1.0, float(other))

    __radd__ = __add__

    def __mul__(self, other):
        return Affine(self, float(other), 0.0)

    __rmul__ = __mul__

    def __neg__(self):
        return Affine(self, -1.0, 0.0)

    def __sub__(self, other):
        return self + (-other if isinstance(other, TerminalClaim) else -float(other))


def eval_claim(claim: TerminalClaim, x):
    out = claim(np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# elementary forms


@dataclass(frozen=True)
class Constant(TerminalClaim):
    c: float = 0.0
    form: ClassVar[str] = "constant"

    def __call__(self, x):
        return np.full(np.shape(x), float(self.c))

    direction = 0
    bounds = property(lambda self: (self.c, self.c))
    levels = property(lambda self: (float(self.c),))

    def to_dict(self):
        return {"form": "constant", "c": self.c}

    @property
    def label(self):
        return f"constant({self.c:g})"


@dataclass(frozen=True)
class Identity(TerminalClaim):
    form: ClassVar[str] = "identity"

    def __call__(self, x):
        return np.asarray(x, dtype=float) * 1.0

    direction = 1
    bounds = property(lambda self: (-math.inf, math.inf))

    def to_dict(self):
        return {"form": "identity"}


@dataclass(frozen=True)
class IdentityClipped(TerminalClaim):
    M: float = 6.0
    form: ClassVar[str] = "identity_clipped"

    def __post_init__(self):
        if not self.M > 0:
            raise ConfigurationError("identity_clipped: M must be > 0")

    def __call__(self, x):
        return np.clip(np.asarray(x, dtype=float), -self.M, self.M)

    direction = 1
    bounds = property(lambda self: (-self.M, self.M))

    def to_dict(self):
        return {"form": "identity_clipped", "M": self.M}

    @property
    def label(self):
        return f"identity_clipped(M={self.M:g})"


@dataclass(frozen=True)
class SmoothMonotone(TerminalClaim):
    """offset + amplitude * tanh((x - center) / scale)."""

    amplitude: float = 1.0
    center: float = 0.0
    scale: float = 1.0
    offset: float = 0.0
    form: ClassVar[str] = "smooth_monotone"

    def __post_init__(self):
        if not self.scale > 0:
            raise ConfigurationError("smooth_monotone: scale must be > 0")

    def __call__(self, x):
        return self.offset + self.amplitude * np.tanh((np.asarray(x, dtype=float) - self.center) / self.scale)

    def derivative(self, x):
        return self.amplitude / self.scale / np.cosh((np.asarray(x, dtype=float) - self.center) / self.scale) ** 2

    @property
    def direction(self):
        return int(np.sign(self.amplitude))

    @property
    def bounds(self):
        a = abs(self.amplitude)
        return (self.offset - a, self.offset + a)

    def to_dict(self):
        return {"form": "smooth_monotone", "amplitude": self.amplitude, "center": self.center,
                "scale": self.scale, "offset": self.offset}

    @property
    def label(self):
        return f"tanh(a={self.amplitude:g},c={self.center:g},s={self.scale:g},o={self.offset:g})"


@dataclass(frozen=True)
class Indicator(TerminalClaim):
    a: float = 0.0
    orientation: str = "ge"  # ge: 1{x >= a}; le: 1{x <= a}
    form: ClassVar[str] = "indicator"

    def __post_init__(self):
        if self.orientation not in ("ge", "le"):
            raise ConfigurationError("indicator orientation must be 'ge' or 'le'")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return (x >= self.a if self.orientation == "ge" else x <= self.a).astype(float)

    @property
    def direction(self):
        return 1 if self.orientation == "ge" else -1

    bounds = property(lambda self: (0.0, 1.0))
    levels = property(lambda self: (0.0, 1.0))
    is_continuous = property(lambda self: False)

    def split(self, domain):
        if self.orientation == "ge":
            return Constant(0.0), ((self.a, 1.0),)
        return Constant(1.0), ((self.a, -1.0),)

    def to_dict(self):
        return {"form": "indicator", "a": self.a, "orientation": self.orientation}

    @property
    def label(self):
        return f"1{{x{'>=' if self.orientation == 'ge' else '<='}{self.a:g}}}"


@dataclass(frozen=True)
class Step(TerminalClaim):
    """sum_i levels[i] * 1{x >= thresholds[i]}."""

    levels_: tuple = (1.0,)
    thresholds: tuple = (0.0,)
    form: ClassVar[str] = "step"

    def __post_init__(self):
        if len(self.levels_) != len(self.thresholds) or not self.thresholds:
            raise ConfigurationError("step: levels and thresholds must be non-empty and equal length")
        object.__setattr__(self, "levels_", tuple(float(v) for v in self.levels_))
        object.__setattr__(self, "thresholds", tuple(float(v) for v in self.thresholds))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for b, a in zip(self.levels_, self.thresholds):
            out = out + b * (x >= a)
        return out

    @property
    def _partial_sums(self):
        order = np.argsort(self.thresholds, kind="stable")
        return np.concatenate([[0.0], np.cumsum(np.asarray(self.levels_)[order])])

    @property
    def direction(self):
        b = np.asarray(self.levels_)
        if np.all(b == 0):
            return 0
        if np.all(b >= 0):
            return 1
        if np.all(b <= 0):
            return -1
        return None

    @property
    def bounds(self):
        s = self._partial_sums
        return (float(s.min()), float(s.max()))

    @property
    def levels(self):
        return tuple(sorted(set(self._partial_sums.tolist())))

    is_continuous = property(lambda self: False)

    def split(self, domain):
        return Constant(0.0), tuple(zip(self.thresholds, self.levels_))

    def to_dict(self):
        return {"form": "step", "levels": list(self.levels_), "thresholds": list(self.thresholds)}


@dataclass(frozen=True)
class AbsValueClipped(TerminalClaim):
    M: float = 6.0
    form: ClassVar[str] = "abs_value_clipped"

    def __call__(self, x):
        return np.minimum(np.abs(np.asarray(x, dtype=float)), self.M)

    direction = None
    bounds = property(lambda self: (0.0, self.M))

    def to_dict(self):
        return {"form": "abs_value_clipped", "M": self.M}

    @property
    def label(self):
        return f"abs_value_clipped(M={self.M:g})"


@dataclass(frozen=True)
class TwoBump(TerminalClaim):
    """l1 on [a, b], l2 on [c, inf), zero elsewhere (a < b < c)."""

    a: float = 0.0
    b: float = 0.5
    c: float = 1.5
    l1: float = 1.0
    l2: float = 0.5
    form: ClassVar[str] = "two_bump"

    def __post_init__(self):
        if not self.a < self.b <= self.c:
            raise ConfigurationError("two_bump needs a < b <= c")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.l1 * ((x >= self.a) & (x <= self.b)) + self.l2 * (x >= self.c)

    @property
    def direction(self):
        vals = [0.0, self.l1, 0.0 if self.c > self.b else self.l1, self.l2]
        diffs = np.diff(vals)
        if np.all(diffs >= 0):
            return 1 if np.any(diffs > 0) else 0
        if np.all(diffs <= 0):
            return -1
        return None

    @property
    def bounds(self):
        vals = (0.0, self.l1, self.l2)
        return (min(vals), max(vals))

    @property
    def levels(self):
        return tuple(sorted({0.0, float(self.l1), float(self.l2)}))

    is_continuous = property(lambda self: False)

    def split(self, domain):
        return Constant(0.0), ((self.a, self.l1), (self.b, -self.l1), (self.c, self.l2))

    def to_dict(self):
        return {"form": "two_bump", "a": self.a, "b": self.b, "c": self.c, "l1": self.l1, "l2": self.l2}

    @property
    def label(self):
        return f"two_bump({self.a:g},{self.b:g},{self.c:g};{self.l1:g},{self.l2:g})"


@dataclass(frozen=True)
class MollifiedIndicator(TerminalClaim):
    """Smoothed threshold indicator.

    ``side="lower"`` smooths 1_{[a-eps, inf)} and equals 1 for x >= a;
    ``side="upper"`` smooths 1_{(a+eps, inf)} and vanishes for x <= a.
    Together they sandwich 1{x >= a}.
    """

    a: float = 0.0
    eps: float = 0.05
    side: str = "lower"
    form: ClassVar[str] = "mollified_indicator"

    def __post_init__(self):
        if not self.eps > 0:
            raise DomainError(f"mollified_indicator: eps must be > 0, got {self.eps}")
        if self.side not in ("lower", "upper"):
            raise ConfigurationError("mollified_indicator side must be 'lower' or 'upper'")

    def __call__(self, x):
        shift = 1.0 if self.side == "lower" else -1.0
        return kernel_cdf((np.asarray(x, dtype=float) - self.a) / self.eps + shift)

    direction = 1
    bounds = property(lambda self: (0.0, 1.0))

    def to_dict(self):
        return {"form": "mollified_indicator", "a": self.a, "eps": self.eps, "side": self.side}

    @property
    def label(self):
        return f"psi_{self.side}(a={self.a:g},eps={self.eps:g})"


def mollify_indicator(a: float, eps: float, side: str) -> MollifiedIndicator:
    return MollifiedIndicator(float(a), float(eps), side)


# ---------------------------------------------------------------------------
# level sets of arbitrary claims


def level_set(claim: TerminalClaim, t: float, domain, n_grid: int = 20001):
    """Intervals (l, r) whose union is {x in domain : claim(x) >= t}.

    Endpoints touching the domain edges are reported as -inf / +inf.  Each
    transition found on the search grid is refined by bisection.
    """
    lo, hi = domain
    x = np.linspace(lo, hi, n_grid)
    inside = claim(x) >= t
    if not inside.any():
        return ()
    change = np.nonzero(inside[1:] != inside[:-1])[0]
    edges = []
    for i in change:
        left, right = x[i], x[i + 1]
        state_left = bool(inside[i])
        for _ in range(64):
            mid = 0.5 * (left + right)
            if mid <= left or mid >= right:
                break
            if (claim(np.array([mid]))[0] >= t) == state_left:
                left = mid
            else:
                right = mid
        edges.append(0.5 * (left + right))
    # turn alternating transitions into closed intervals
    points = [-math.inf] if inside[0] else []
    points += edges
    if inside[-1]:
        points.append(math.inf)
    return tuple((points[k], points[k + 1]) for k in range(0, len(points), 2))


def _interval_jumps(intervals):
    const = 0.0
    jumps = []
    for left, right in intervals:
        if math.isinf(left):
            const += 1.0
        else:
            jumps.append((left, 1.0))
        if not math.isinf(right):
            jumps.append((right, -1.0))
    return const, tuple(jumps)


@dataclass(frozen=True)
class Event(TerminalClaim):
    """The indicator 1{base(x) >= threshold}."""

    base: TerminalClaim
    threshold: float
    form: ClassVar[str] = "event"

    def __call__(self, x):
        return (self.base(x) >= self.threshold).astype(float)

    @property
    def direction(self):
        return self.base.direction

    bounds = property(lambda self: (0.0, 1.0))
    levels = property(lambda self: (0.0, 1.0))
    is_continuous = property(lambda self: False)

    def split(self, domain):
        const, jumps = _interval_jumps(level_set(self.base, self.threshold, domain))
        return Constant(const), jumps

    def to_dict(self):
        return {"form": "event", "base": self.base.to_dict(), "threshold": self.threshold}

    @property
    def label(self):
        return f"1{{{self.base.label}>={self.threshold:g}}}"


@dataclass(frozen=True)
class StepApproximation(TerminalClaim):
    """Phi_N(x) = sum_{i=1..N} (M/N) 1{Phi(x) >= i M / N}."""

    source: TerminalClaim
    N: int
    M: float
    form: ClassVar[str] = "step_approximation"

    def __call__(self, x):
        v = self.source(x)
        count = np.zeros(np.shape(v))
        for i in range(1, self.N + 1):
            count = count + (v >= i * self.M / self.N)
        return count * (self.M / self.N)

    @property
    def level_values(self):
        return tuple(i * self.M / self.N for i in range(1, self.N + 1))

    @property
    def direction(self):
        return self.source.direction

    bounds = property(lambda self: (0.0, float(self.M)))
    levels = property(lambda self: tuple(i * self.M / self.N for i in range(self.N + 1)))
    is_continuous = property(lambda self: False)

    def split(self, domain):
        const = 0.0
        jumps = []
        h = self.M / self.N
        for level in self.level_values:
            c, js = _interval_jumps(level_set(self.source, level, domain))
            const += h * c
            jumps.extend((x, h * j) for x, j in js)
        return Constant(const), tuple(jumps)

    def to_dict(self):
        return {"form": "step_approximation", "source": self.source.to_dict(), "N": self.N, "M": self.M}

    @property
    def label(self):
        return f"step_N{self.N}[{self.source.label}]"


def make_step_approximation(claim: TerminalClaim, N: int, M: float | None = None, domain=(-50.0, 50.0)):
    """Build Phi_N for a claim with 0 <= Phi <= M.

    The claim's value range is checked on its declared bounds and on a
    dense sample of ``domain``.
    """
    if N < 1:
        raise ConfigurationError("step approximation needs N >= 1")
    lo, hi = claim.bounds
    M = float(hi if M is None else M)
    if not (math.isfinite(M) and M > 0):
        raise DomainError("step approximation needs a bounded claim with M > 0")
    sample = claim(np.linspace(domain[0], domain[1], 20001))
    if lo < 0 or sample.min() < 0 or hi > M or sample.max() > M:
        raise DomainError(f"step approximation needs 0 <= Phi <= M={M:g}; shift or clip the claim first")
    return StepApproximation(claim, int(N), M)


# ---------------------------------------------------------------------------
# composites


@dataclass(frozen=True)
class Affine(TerminalClaim):
    base: TerminalClaim
    scale: float = 1.0
    shift: float = 0.0
    form: ClassVar[str] = "affine"

    def __call__(self, x):
        return self.scale * self.base(x) + self.shift

    @property
    def direction(self):
        d = self.base.direction
        if self.scale == 0 or d == 0:
            return 0
        if d is None:
            return None
        return d if self.scale > 0 else -d

    @property
    def bounds(self):
        lo, hi = self.base.bounds
        if self.scale == 0:
            return (self.shift, self.shift)
        vals = (self.scale * lo + self.shift, self.scale * hi + self.shift)
        return (min(vals), max(vals))

    @property
    def levels(self):
        base = self.base.levels
        if self.scale == 0:
            return (float(self.shift),)
        return None if base is None else tuple(sorted(self.scale * v + self.shift for v in base))

    @property
    def is_continuous(self):
        return self.scale == 0 or self.base.is_continuous

    def split(self, domain):
        if self.is_continuous:
            return self, ()
        cont, jumps = self.base.split(domain)
        return Affine(cont, self.scale, self.shift), tuple((x, self.scale * j) for x, j in jumps)

    def to_dict(self):
        return {"form": "affine", "base": self.base.to_dict(), "scale": self.scale, "shift": self.shift}

    @property
    def label(self):
        return f"{self.scale:g}*{self.base.label}+{self.shift:g}"


@dataclass(frozen=True)
class Sum(TerminalClaim):
    parts: tuple
    form: ClassVar[str] = "sum"

    def __call__(self, x):
        out = self.parts[0](x)
        for p in self.parts[1:]:
            out = out + p(x)
        return out

    @property
    def direction(self):
        dirs = [p.direction for p in self.parts]
        if any(d is None for d in dirs):
            return None
        if all(d == 0 for d in dirs):
            return 0
        if all(d >= 0 for d in dirs):
            return 1
        if all(d <= 0 for d in dirs):
            return -1
        return None

    @property
    def bounds(self):
        return (sum(p.bounds[0] for p in self.parts), sum(p.bounds[1] for p in self.parts))

    @property
    def levels(self):
        out = {0.0}
        for p in self.parts:
            lv = p.levels
            if lv is None:
                return None
            out = {a + b for a in out for b in lv}
            if len(out) > 4096:
                return None
        return tuple(sorted(out))

    @property
    def is_continuous(self):
        return all(p.is_continuous for p in self.parts)

    def split(self, domain):
        conts, jumps = [], []
        for p in self.parts:
            c, j = p.split(domain)
            conts.append(c)
            jumps.extend(j)
        return (conts[0] if len(conts) == 1 else Sum(tuple(conts))), tuple(jumps)

    def to_dict(self):
        return {"form": "sum", "parts": [p.to_dict() for p in self.parts]}

    @property
    def label(self):
        return "(" + "+".join(p.label for p in self.parts) + ")"


@dataclass(frozen=True)
class Clipped(TerminalClaim):
    """(base ^ hi) v lo; with lo = -N, hi = N this is the truncation at level N."""

    base: TerminalClaim
    lo: float
    hi: float
    form: ClassVar[str] = "clipped"

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ConfigurationError("clipped: lo must be <= hi")

    def __call__(self, x):
        return np.clip(self.base(x), self.lo, self.hi)

    @property
    def direction(self):
        return self.base.direction

    @property
    def bounds(self):
        blo, bhi = self.base.bounds
        return (max(self.lo, min(blo, self.hi)), min(self.hi, max(bhi, self.lo)))

    @property
    def levels(self):
        lv = self.base.levels
        return None if lv is None else tuple(sorted({min(max(v, self.lo), self.hi) for v in lv}))

    @property
    def is_continuous(self):
        return self.base.is_continuous

    def split(self, domain):
        if self.base.is_continuous:
            return self, ()
        raise ConfigurationError("clipping a discontinuous claim is not supported by the PDE bracket")

    def to_dict(self):
        return {"form": "clipped", "base": self.base.to_dict(), "lo": self.lo, "hi": self.hi}

    @property
    def label(self):
        return f"clip[{self.lo:g},{self.hi:g}]({self.base.label})"


def truncate(claim: TerminalClaim, N: float) -> Clipped:
    return Clipped(claim, -float(N), float(N))


# ---------------------------------------------------------------------------
# probes


def monotonicity_probe(claim: TerminalClaim, sample_count: int = 1000, domain=(-8.0, 8.0)) -> str:
    """'nondecreasing', 'nonincreasing' or 'neither' on sorted samples."""
    if sample_count < 2:
        raise ConfigurationError("monotonicity_probe needs sample_count >= 2")
    x = np.linspace(domain[0], domain[1], sample_count)
    diffs = np.diff(claim(x))
    tol = 1e-12 * max(1.0, float(np.max(np.abs(claim(x)))))
    if np.all(diffs >= -tol):
        return "nondecreasing"
    if np.all(diffs <= tol):
        return "nonincreasing"
    return "neither"


# ---------------------------------------------------------------------------
# (de)serialisation


def claim_from_dict(data, path="claim") -> TerminalClaim:
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: expected an object")
    data = dict(data)
    form = data.pop("form", None)
    if form is None:
        raise ConfigurationError(f"{path}: missing required key 'form'")
    spec = _FORMS.get(form)
    if spec is None:
        raise ConfigurationError(f"{path}.form: unknown claim form {form!r}")
    keys, build = spec
    for key in data:
        if key not in keys:
            raise ConfigurationError(f"{path}.{key}: unknown key for claim form {form!r}")
    try:
        return build(data, path)
    except KeyError as exc:
        raise ConfigurationError(f"{path}.{exc.args[0]}: missing required key") from None


def _f(data, key, default=None):
    if key not in data and default is None:
        raise KeyError(key)
    return float(data.get(key, default))


_FORMS = {
    "constant": ({"c"}, lambda d, p: Constant(_f(d, "c", 0.0))),
    "identity": (set(), lambda d, p: Identity()),
    "identity_clipped": ({"M"}, lambda d, p: IdentityClipped(_f(d, "M", 6.0))),
    "smooth_monotone": (
        {"amplitude", "center", "scale", "offset"},
        lambda d, p: SmoothMonotone(_f(d, "amplitude", 1.0), _f(d, "center", 0.0), _f(d, "scale", 1.0),
                                    _f(d, "offset", 0.0)),
    ),
    "indicator": ({"a", "orientation"}, lambda d, p: Indicator(_f(d, "a", 0.0), d.get("orientation", "ge"))),
    "step": ({"levels", "thresholds"}, lambda d, p: Step(tuple(d["levels"]), tuple(d["thresholds"]))),
    "abs_value_clipped": ({"M"}, lambda d, p: AbsValueClipped(_f(d, "M", 6.0))),
    "two_bump": (
        {"a", "b", "c", "l1", "l2"},
        lambda d, p: TwoBump(_f(d, "a", 0.0), _f(d, "b", 0.5), _f(d, "c", 1.5), _f(d, "l1", 1.0), _f(d, "l2", 0.5)),
    ),
    "mollified_indicator": (
        {"a", "eps", "side"},
        lambda d, p: MollifiedIndicator(_f(d, "a", 0.0), _f(d, "eps", 0.05), d.get("side", "lower")),
    ),
    "step_approximation": (
        {"source", "N", "M"},
        lambda d, p: make_step_approximation(claim_from_dict(d["source"], p + ".source"), int(d["N"]),
                                             d.get("M")),
    ),
    "event": ({"base", "threshold"}, lambda d, p: Event(claim_from_dict(d["base"], p + ".base"), _f(d, "threshold"))),
    "affine": (
        {"base", "scale", "shift"},
        lambda d, p: Affine(claim_from_dict(d["base"], p + ".base"), _f(d, "scale", 1.0), _f(d, "shift", 0.0)),
    ),
    "sum": (
        {"parts"},
        lambda d, p: Sum(tuple(claim_from_dict(c, f"{p}.parts[{i}]") for i, c in enumerate(d["parts"]))),
    ),
    "clipped": (
        {"base", "lo", "hi"},
        lambda d, p: Clipped(claim_from_dict(d["base"], p + ".base"), _f(d, "lo"), _f(d, "hi")),
    ),
}
