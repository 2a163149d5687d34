"""Initial measures ``mu_0`` and size-biased sampling of ``X(0)``.

The solution only sees ``mu_0`` through the probability law ``x mu_0(dx)``
(total first moment one).  Each piece of an :class:`InitialMeasure` is
therefore described by its share of that law: atoms carry ``location *
mass``, tails carry an explicit ``weight`` and a normalised size-biased law.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special

from .errors import ConfigError, UnsupportedTailError
from .measure import quad

NORMALIZATION_TOL = 1e-9


class Tail:
    """Absolutely continuous part; ``weight`` is its contribution to ``int x mu_0(dx)``."""

    kind = "tail"
    weight = 1.0
    support_sup = math.inf
    infinite_variance = False

    def u0(self, x):
        """Density of ``mu_0`` itself."""
        return self.weight * self.sb_pdf(x) / np.asarray(x, dtype=float)

    def sb_pdf(self, x):
        raise NotImplementedError

    def sb_moment(self, p):
        raise NotImplementedError

    def sample(self, rng, size):
        raise NotImplementedError


@dataclass
class StretchedExpTail(Tail):
    """``u_0(x) = K exp(-C x**gamma_tail)`` on ``]0, inf[``, so ``ln u_0(x) ~ -C x**gamma_tail``."""

    C: float
    gamma_tail: float
    weight: float = 1.0
    kind = "stretched_exp"

    def __post_init__(self):
        if not (self.C > 0 and self.gamma_tail > 0):
            raise ConfigError("stretched_exp needs C > 0 and gamma_tail > 0")

    @property
    def K(self):
        g = self.gamma_tail
        return self.weight * g * self.C ** (2.0 / g) / special.gamma(2.0 / g)

    def u0(self, x):
        x = np.asarray(x, dtype=float)
        return self.K * np.exp(-self.C * x ** self.gamma_tail)

    def sb_pdf(self, x):
        x = np.asarray(x, dtype=float)
        return x * self.K * np.exp(-self.C * x ** self.gamma_tail) / self.weight

    def sb_moment(self, p):
        g = self.gamma_tail
        return math.exp(special.gammaln((2.0 + p) / g) - special.gammaln(2.0 / g)) / self.C ** (p / g)

    def sample(self, rng, size):
        # x^{1} e^{-C x^g} dx: C X^g ~ Gamma(2/g)
        return (rng.gamma(2.0 / self.gamma_tail, 1.0, size) / self.C) ** (1.0 / self.gamma_tail)


@dataclass
class PowerTail(Tail):
    """``u_0(x) = C x**-gamma_tail`` on ``[lower, inf[`` with ``gamma_tail > 2``."""

    C: float
    gamma_tail: float
    lower: float = 1.0
    kind = "power"

    def __post_init__(self):
        if not (self.C > 0 and self.gamma_tail > 2 and self.lower > 0):
            raise ConfigError("power tail needs C > 0, gamma_tail > 2 and lower > 0")

    @property
    def weight(self):
        return self.C * self.lower ** (2.0 - self.gamma_tail) / (self.gamma_tail - 2.0)

    @property
    def infinite_variance(self):
        # int x^2 * x u_0(x) dx diverges iff gamma_tail <= 4
        return self.gamma_tail <= 4.0

    def u0(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= self.lower, self.C * np.maximum(x, self.lower) ** -self.gamma_tail, 0.0)

    def sb_pdf(self, x):
        x = np.asarray(x, dtype=float)
        return x * self.u0(x) / self.weight

    def sb_moment(self, p):
        k = self.gamma_tail - 2.0
        return math.inf if p >= k else k * self.lower ** p / (k - p)

    def sample(self, rng, size):
        return self.lower * rng.uniform(size=size) ** (-1.0 / (self.gamma_tail - 2.0))


class GenericDensityTail(Tail):
    """User density ``u_0`` on ``[lo, hi]``; sampled by inverse CDF on a tabulated grid."""

    kind = "generic_density"

    def __init__(self, u0: Callable, support=(0.0, 1.0), weight=None, nodes=4001):
        lo, hi = float(support[0]), float(support[1])
        if not (0 <= lo < hi):
            raise ConfigError("generic density support must satisfy 0 <= lo < hi")
        self._u0 = u0
        self.support = (lo, hi)
        self.support_sup = hi
        try:
            mass, _ = quad(lambda x: x * float(u0(x)), lo, hi, 1e-10)
        except Exception as exc:
            raise UnsupportedTailError("x u_0(x) is not integrable on the given support") from exc
        if not (np.isfinite(mass) and mass > 0):
            raise UnsupportedTailError("x u_0(x) must have a positive finite integral")
        self._mass = mass
        self.weight = mass if weight is None else float(weight)
        if math.isinf(hi):
            # map [lo, inf[ to a finite grid through the quantile where the tail is negligible
            top = lo + 1.0
            while quad(lambda x: x * float(u0(x)), top, math.inf, 1e-8)[0] > 1e-12 * mass:
                top = 2 * top
            hi_grid = top
        else:
            hi_grid = hi
        xs = np.linspace(lo, hi_grid, nodes)
        f = xs * np.asarray(u0(xs), dtype=float)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(xs))])
        self._xs, self._cdf = xs, cdf / cdf[-1]
        self.infinite_variance = False

    def u0(self, x):
        return self.weight / self._mass * np.asarray(self._u0(np.asarray(x, dtype=float)), dtype=float)

    def sb_pdf(self, x):
        x = np.asarray(x, dtype=float)
        return x * np.asarray(self._u0(x), dtype=float) / self._mass

    def sb_moment(self, p):
        lo, hi = self.support
        return quad(lambda x: x ** (p + 1) * float(self._u0(x)), lo, hi, 1e-10)[0] / self._mass

    def sample(self, rng, size):
        return np.interp(rng.uniform(size=size), self._cdf, self._xs)


class SizeBiasedLawTail(Tail):
    """Tail whose size-biased law is a given exact law (used for quasi-stationary starts)."""

    kind = "law"

    def __init__(self, law, transform: Callable = None, moment: Callable = None, weight=1.0,
                 support_sup=math.inf, pdf: Callable = None):
        self.law = law
        self.weight = float(weight)
        self.support_sup = support_sup
        self._transform = transform or (lambda v: v)
        self._moment = moment
        self._pdf = pdf

    def sb_pdf(self, x):
        if self._pdf is None:
            raise NotImplementedError("no density attached")
        return self._pdf(np.asarray(x, dtype=float))

    def sb_moment(self, p):
        if self._moment is None:
            raise NotImplementedError("no moment evaluator attached")
        return self._moment(p)

    def sample(self, rng, size):
        return self._transform(self.law.sample(rng, size))


@dataclass
class InitialMeasure:
    """``mu_0`` = atoms ``(location, mass)`` plus an optional tail."""

    atoms: list = field(default_factory=list)
    tail: Optional[Tail] = None

    def __post_init__(self):
        self.atoms = [(float(a), float(m)) for a, m in self.atoms]
        for a, m in self.atoms:
            if not (a > 0 and m >= 0):
                raise ConfigError("atoms need location > 0 and mass >= 0")
        total = self.first_moment
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ConfigError(f"int x mu_0(dx) must equal 1, got {total!r}")

    @classmethod
    def dirac(cls, x=1.0):
        return cls([(x, 1.0 / x)])

    @classmethod
    def normalized(cls, atoms=(), tail=None):
        """Rescale atoms and tail weight so that the first moment is one."""
        atoms = [(float(a), float(m)) for a, m in atoms]
        total = sum(a * m for a, m in atoms) + (tail.weight if tail is not None else 0.0)
        if not total > 0:
            raise ConfigError("initial measure has zero first moment")
        atoms = [(a, m / total) for a, m in atoms]
        if tail is not None:
            if isinstance(tail, PowerTail):
                tail = PowerTail(tail.C / total, tail.gamma_tail, tail.lower)
            else:
                tail.weight = tail.weight / total
        return cls(atoms, tail)

    @property
    def first_moment(self):
        return sum(a * m for a, m in self.atoms) + (self.tail.weight if self.tail is not None else 0.0)

    @property
    def support_sup(self):
        sups = [a for a, m in self.atoms if m > 0]
        if self.tail is not None:
            sups.append(self.tail.support_sup)
        return max(sups) if sups else 0.0

    @property
    def bounded(self):
        return math.isfinite(self.support_sup)

    @property
    def infinite_variance(self):
        return self.tail is not None and bool(self.tail.infinite_variance)

    def atom_mass(self, x):
        return sum(m for a, m in self.atoms if a == x)

    def is_dirac(self):
        return self.tail is None and len([1 for _, m in self.atoms if m > 0]) == 1

    def to_spec(self):
        spec = {"atoms": [[a, m] for a, m in self.atoms]}
        if isinstance(self.tail, StretchedExpTail):
            spec["tail"] = {"kind": "stretched_exp", "C": self.tail.C, "gamma": self.tail.gamma_tail,
                            "weight": self.tail.weight}
        elif isinstance(self.tail, PowerTail):
            spec["tail"] = {"kind": "power", "C": self.tail.C, "gamma": self.tail.gamma_tail,
                            "lower": self.tail.lower}
        elif self.tail is not None:
            spec["tail"] = {"kind": self.tail.kind}
        return spec

    @classmethod
    def from_spec(cls, spec):
        """``{"atoms": [[x, m], ...], "tail": {"kind": ..., ...}, "normalize": bool}``."""
        if spec is None:
            return cls.dirac()
        atoms = spec.get("atoms", [])
        tail = None
        t = spec.get("tail")
        if t:
            kind = t.get("kind")
            if kind == "stretched_exp":
                tail = StretchedExpTail(float(t["C"]), float(t["gamma"]), float(t.get("weight", 1.0)))
            elif kind == "power":
                tail = PowerTail(float(t["C"]), float(t["gamma"]), float(t.get("lower", 1.0)))
            else:
                raise ConfigError(f"unknown tail kind {kind!r}")
        if spec.get("normalize", False):
            return cls.normalized(atoms, tail)
        return cls(atoms, tail)


def sample_initial(mu0: InitialMeasure, rng, size=None):
    """Draw ``X(0)`` from ``x mu_0(dx)``; returns ``(values, from_atom_index)``.

    ``from_atom_index`` is ``-1`` for tail draws.
    """
    n = 1 if size is None else int(size)
    weights = [a * m for a, m in mu0.atoms]
    if mu0.tail is not None:
        weights.append(mu0.tail.weight)
    w = np.asarray(weights) / np.sum(weights)
    if len(w) == 1:
        which = np.zeros(n, dtype=np.int64)
    else:
        which = rng.choice(len(w), size=n, p=w)
    out = np.empty(n)
    for k, (a, _) in enumerate(mu0.atoms):
        out[which == k] = a
    tag = which.copy()
    if mu0.tail is not None:
        sel = which == len(mu0.atoms)
        out[sel] = mu0.tail.sample(rng, int(sel.sum()))
        tag[sel] = -1
    if size is None:
        return float(out[0]), int(tag[0])
    return out, tag
