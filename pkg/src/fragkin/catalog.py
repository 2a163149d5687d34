"""Closed-form oracles: moments of ``I`` and ``R``, the limit measure and the example catalog.

``R`` is the random variable whose moments are ``prod_{i<=n} phi(i|alpha|)``
and ``R**(1/|alpha|)`` has law ``x mu_inf(dx)``.  For ``I`` independent of
``R``, ``R I`` is standard exponential.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special, stats

from .errors import (InapplicableBranchError, ParameterRangeError, PreconditionError)
from .initial import InitialMeasure, SizeBiasedLawTail
from .laws import (BetaLaw, ExactLaw, ExpPower, GammaLaw, LatticeLaw, MittagLeffler, SeriesDensity,
                   SizeBiasedMittagLeffler, mittag_leffler_density)
from .measure import (Dirac, Example1Density, Example2Density, Example3Density, Example4Density,
                      FragmentationMeasure, LaplaceExponentTable, laplace_exponent, quad, rate_functions)


def _log_phi_product(tab: LaplaceExponentTable, alpha, n):
    a = -alpha
    vals = tab.phi(a * np.arange(1, n + 1, dtype=float))
    if np.any(vals <= 0):
        raise PreconditionError("phi(i|alpha|) must be positive")
    return float(np.sum(np.log(vals)))


def moments_of_I(tab: LaplaceExponentTable, alpha, n):
    """``E[I**n] = n! / prod_{i<=n} phi(i|alpha|)``."""
    n = int(n)
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return 1.0
    lv = special.gammaln(n + 1) - _log_phi_product(tab, alpha, n)
    if lv > 709.0:
        raise OverflowError(f"E[I^{n}] overflows double precision")
    return math.exp(lv)


def moments_of_R(tab: LaplaceExponentTable, alpha, n):
    """``E[R**n] = prod_{i<=n} phi(i|alpha|)``."""
    n = int(n)
    return 1.0 if n == 0 else math.exp(_log_phi_product(tab, alpha, n))


@dataclass
class LimitMeasure:
    """The limit law: ``R`` moments, optional exact law of ``R`` and density ``u_inf``.

    ``qs_scale`` is ``lam`` for the scaled family whose size-biased law is
    ``lam R**(1/|alpha|)``; ``lam = 1`` is ``mu_inf`` itself.
    """

    alpha: float
    tab: LaplaceExponentTable = field(repr=False)
    law_R: Optional[ExactLaw] = None
    u_inf: Optional[Callable] = field(default=None, repr=False)
    qs_scale: float = 1.0

    @property
    def abs_alpha(self):
        return -self.alpha

    def moments(self, n):
        """``E[(lam**|alpha| R)**n]``."""
        return self.qs_scale ** (self.abs_alpha * n) * moments_of_R(self.tab, self.alpha, n)

    def density(self, x):
        if self.u_inf is None:
            raise PreconditionError("no closed-form density for this limit measure")
        lam = self.qs_scale
        x = np.asarray(x, dtype=float)
        return self.u_inf(x / lam) / lam ** 2

    @property
    def has_density(self):
        return self.u_inf is not None

    def scaled(self, lam):
        return LimitMeasure(self.alpha, self.tab, self.law_R, self.u_inf, float(lam))

    def sample(self, rng, size):
        """Draws of ``lam R**(1/|alpha|)`` (law ``x mu(dx)``)."""
        if self.law_R is None:
            raise PreconditionError("no sampler for R")
        return self.qs_scale * self.law_R.sample(rng, size) ** (1.0 / self.abs_alpha)

    def normalization(self, n=0):
        """``int x**(|alpha| n) x u(x) dx`` by quadrature (equals ``moments(n)``)."""
        a = self.abs_alpha
        f = lambda x: x ** (a * n + 1) * float(self.density(x))
        mid = min(self.qs_scale, self.support_sup)
        left, _ = quad(f, 0.0, mid, 1e-11)
        right = quad(f, mid, self.support_sup, 1e-11)[0] if self.support_sup > mid else 0.0
        return left + right

    @property
    def support_sup(self):
        pinf = self.tab.phi_inf
        return self.qs_scale * pinf ** (1.0 / self.abs_alpha) if math.isfinite(pinf) else math.inf


@dataclass
class CatalogEntry:
    example_id: int
    params: dict
    B: FragmentationMeasure
    law_I: Optional[ExactLaw]
    law_R: Optional[ExactLaw]
    lim: LimitMeasure
    m1: Optional[Callable]
    tab: LaplaceExponentTable = field(repr=False)

    def m1_values(self, t):
        if self.m1 is None:
            raise PreconditionError("no closed-form mass for this example")
        return self.m1(np.asarray(t, dtype=float))


def _exact_laws(B: FragmentationMeasure):
    """``(law_I, law_R, u_inf, m1)`` when ``B`` is a catalog measure, else ``None``."""
    if len(B.components) != 1:
        return None
    c = B.components[0]
    al = B.alpha
    a = -al
    if isinstance(c, Example1Density) and B.dust_rate == 0:
        k = c.b / a
        law_I = GammaLaw(k + 1.0)
        law_R = BetaLaw(1.0, k)
        b = c.b
        u_inf = lambda x: np.where((x > 0) & (x < 1), b * x ** (a - 2) * (1 - np.minimum(x, 1.0) ** a) ** (k - 1), 0.0)
        return law_I, law_R, u_inf, law_I.sf
    if isinstance(c, Example2Density):
        g = c.g
        if abs(B.dust_rate - 1.0 / special.gamma(1 - g)) > 1e-12:
            return None
        law_I = MittagLeffler(g)
        law_R = ExpPower(g)
        u_inf = lambda x: np.where(x > 0, (a / g) * x ** (a / g - 2) * np.exp(-np.maximum(x, 0) ** (a / g)), 0.0)
        return law_I, law_R, u_inf, law_I.sf
    if isinstance(c, Example3Density) and B.dust_rate == 0:
        g = c.g
        law_I = ExpPower(1.0 - g)
        law_R = MittagLeffler(1.0 - g)
        u_inf = lambda x: a * x ** (a - 2) * mittag_leffler_density(1.0 - g, np.asarray(x, dtype=float) ** a)
        return law_I, law_R, u_inf, lambda t: np.exp(-np.maximum(t, 0.0) ** (1.0 / (1.0 - g)))
    if isinstance(c, Example4Density) and B.dust_rate == 0:
        law_I = SizeBiasedMittagLeffler(a, 1.0 - a)
        law_R = _GammaPower(a, a, 1.0 / (1.0 - a))
        cst = (1.0 - a) ** (1.0 / a)
        u_inf = lambda x: np.where(x > 0, (1 - a) / special.gamma(a) * x ** (a - 2) * np.exp(-cst * np.maximum(x, 0)), 0.0)
        return law_I, law_R, u_inf, law_I.sf
    if isinstance(c, Dirac) and B.dust_rate == 0 and abs(c.weight * c.location - 1.0) < 1e-12:
        q = c.location ** al
        law_I = SeriesDensity(q)
        law_R = LatticeLaw(1.0 / q)
        return law_I, law_R, None, law_I.sf
    return None


@dataclass(repr=False)
class _GammaPower(ExactLaw):
    """``scale * G**exponent`` with ``G ~ Gamma(shape)``."""

    shape: float
    exponent: float
    scale: float = 1.0
    name = "gamma-power"

    def params(self):
        return {"shape": self.shape, "exponent": self.exponent, "scale": self.scale}

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        z = np.where(x > 0, x, 1.0) / self.scale
        g = z ** (1.0 / self.exponent)
        val = stats.gamma(self.shape).pdf(g) * g / (self.exponent * z * self.scale)
        return np.where(x > 0, val, 0.0)

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return stats.gamma(self.shape).sf((np.maximum(x, 0) / self.scale) ** (1.0 / self.exponent))

    def moment(self, n):
        return self.scale ** n * math.exp(special.gammaln(self.shape + self.exponent * n)
                                          - special.gammaln(self.shape))

    def sample(self, rng, size):
        return self.scale * rng.gamma(self.shape, 1.0, size) ** self.exponent


def limit_measure(tab: LaplaceExponentTable, alpha) -> LimitMeasure:
    """Limit measure with moments ``prod phi(i|alpha|)``; exact law and density attached for catalog measures."""
    if not alpha < 0:
        raise ParameterRangeError("alpha must be negative")
    laws = _exact_laws(tab.measure) if tab.measure.alpha == alpha else None
    if laws is None:
        return LimitMeasure(float(alpha), tab)
    _, law_R, u_inf, _ = laws
    return LimitMeasure(float(alpha), tab, law_R, u_inf)


EXAMPLE_DEFAULTS = {
    1: {"b": 2.0, "alpha": -1.0},
    2: {"gamma": 0.5, "alpha": -0.5, "variant": "dust"},
    3: {"gamma": 0.5, "alpha": -1.0},
    4: {"alpha": -0.5},
    5: {"a": 0.5, "alpha": -1.0},
}


def example_measure(example_id, **params) -> FragmentationMeasure:
    """The fragmentation measure of a catalog example."""
    if example_id not in EXAMPLE_DEFAULTS:
        raise ParameterRangeError(f"unknown example {example_id!r}; choose 1..5")
    p = dict(EXAMPLE_DEFAULTS[example_id])
    p.update({k: v for k, v in params.items() if v is not None})
    al = float(p["alpha"])
    if not al < 0:
        raise ParameterRangeError("alpha must be negative")
    try:
        if example_id == 1:
            if not p["b"] > 0:
                raise ParameterRangeError("Example 1 needs b > 0")
            return FragmentationMeasure((Example1Density(p["b"]),), al)
        if example_id == 2:
            g = float(p["gamma"])
            if not 0 < g < 1:
                raise ParameterRangeError("Example 2 needs 0 < gamma < 1")
            dust = 1.0 / special.gamma(1 - g) if p.get("variant", "dust") == "dust" else 0.0
            return FragmentationMeasure((Example2Density(g, al),), al, dust)
        if example_id == 3:
            g = float(p["gamma"])
            if not 0 < g < 1:
                raise ParameterRangeError("Example 3 needs 0 < gamma < 1")
            return FragmentationMeasure((Example3Density(g, al),), al)
        if example_id == 4:
            if not -1 < al < 0:
                raise ParameterRangeError("Example 4 needs -1 < alpha < 0")
            return FragmentationMeasure((Example4Density(al),), al)
        a = float(p["a"])
        if not 0 < a < 1:
            raise ParameterRangeError("Example 5 needs 0 < a < 1")
        return FragmentationMeasure((Dirac(a),), al)
    except ParameterRangeError:
        raise
    except ValueError as exc:
        raise ParameterRangeError(str(exc)) from exc


def catalog(example_id, **params) -> CatalogEntry:
    """Measure, exact laws of ``I`` and ``R``, limit measure and ``m_1`` for Examples 1-5.

    Example 2 defaults to the variant with dust rate ``1/Gamma(1-gamma)``,
    the one whose ``I`` is Mittag-Leffler; ``variant="printed"`` drops the
    dust and carries no closed-form laws.
    """
    B = example_measure(example_id, **params)
    tab = laplace_exponent(B)
    laws = _exact_laws(B)
    p = dict(EXAMPLE_DEFAULTS[example_id])
    p.update({k: v for k, v in params.items() if v is not None})
    if laws is None:
        return CatalogEntry(example_id, p, B, None, None, LimitMeasure(B.alpha, tab), None, tab)
    law_I, law_R, u_inf, m1 = laws
    return CatalogEntry(example_id, p, B, law_I, law_R, LimitMeasure(B.alpha, tab, law_R, u_inf), m1, tab)


class QuasiStationaryInitial(InitialMeasure):
    """``mu_0`` whose size-biased law is ``lam R**(1/|alpha|)``; survival is ``exp(-lam**alpha t)``."""

    def __init__(self, lim: LimitMeasure, lam: float):
        self.lam = float(lam)
        self.lim = lim.scaled(self.lam)
        a = lim.abs_alpha
        moment = lambda p: self.lim.moments(p / a)
        pdf = (lambda x: x * self.lim.density(x)) if lim.has_density else None
        tail = SizeBiasedLawTail(lim.law_R, lambda r: self.lam * r ** (1.0 / a), moment, 1.0,
                                 self.lim.support_sup, pdf)
        super().__init__([], tail)

    def survival(self, t):
        return np.exp(-self.lam ** self.lim.alpha * np.asarray(t, dtype=float))


def quasi_stationary(lim: LimitMeasure, lam: float) -> QuasiStationaryInitial:
    if not lam > 0:
        raise ParameterRangeError("lambda must be positive")
    if lim.law_R is None:
        raise PreconditionError("quasi-stationary start needs an exact law for R")
    return QuasiStationaryInitial(lim, lam)


@dataclass
class FactorizationReport:
    orders: list
    empirical: list
    target: list
    z_scores: list
    ks_statistic: float
    ks_pvalue: float
    n: int
    threshold: float
    passed: bool

    def to_dict(self):
        return dict(self.__dict__)


def factorization_check(law_I: ExactLaw, lim: LimitMeasure, n_rep, rng, orders=(1, 2, 3, 4),
                        threshold=4.0) -> FactorizationReport:
    """Independent draws of ``R`` and ``I``; moments of ``R I`` against ``n!``."""
    if lim.law_R is None or law_I is None:
        raise PreconditionError("factorization check needs samplers for both R and I")
    R = lim.law_R.sample(rng, n_rep)
    I = law_I.sample(rng, n_rep)
    P = R * I
    emp, tgt, zs = [], [], []
    for k in orders:
        v = P ** k
        se = v.std(ddof=1) / math.sqrt(n_rep)
        emp.append(float(v.mean()))
        tgt.append(float(math.factorial(k)))
        zs.append(float((v.mean() - math.factorial(k)) / se))
    ks = stats.kstest(P, "expon")
    return FactorizationReport(list(orders), emp, tgt, zs, float(ks.statistic), float(ks.pvalue), int(n_rep),
                               threshold, all(abs(z) <= threshold for z in zs))


@dataclass
class TailReport:
    branch: str
    grid: list = field(default_factory=list)
    lhs: list = field(default_factory=list)
    rhs: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    support_sup: float = math.inf
    atom_criterion: Optional[float] = None
    atom_present: Optional[bool] = None
    atom_mass: Optional[float] = None
    conclusive: bool = True

    def to_dict(self):
        return dict(self.__dict__)


def tail_asymptotics_mu_inf(lim: LimitMeasure, tab: LaplaceExponentTable, alpha, grid=None) -> TailReport:
    """Tail of ``R`` at infinity (``0 < beta < 1``) or its bounded support (``phi(inf) < inf``)."""
    a = -alpha
    if math.isfinite(tab.phi_inf):
        crit = sum(c.near_one_mass(tab.quadrature_tol) for c in tab.measure.components)
        atom = None
        if isinstance(lim.law_R, LatticeLaw):
            atom = lim.law_R.atom_at_one
        return TailReport("bounded", support_sup=tab.phi_inf ** (1.0 / a), atom_criterion=crit,
                          atom_present=bool(math.isfinite(crit)), atom_mass=atom)
    beta = tab.beta
    if beta is None or not 0 < beta < 1:
        raise InapplicableBranchError("tail branch needs 0 < beta < 1 or phi(inf) < inf")
    grid = [3.0, 4.0, 5.0, 6.0] if grid is None else list(grid)
    rf = rate_functions(tab)
    if lim.law_R is None:
        raise PreconditionError("tail comparison needs the exact law of R")
    sf = lambda s: float(lim.law_R.sf(s))
    lhs, rhs, ratios = [], [], []
    for s in grid:
        p = sf(s)
        l = -math.log(p) if p > 0 else math.inf
        r = beta / a * rf.phi_inverse(s)
        lhs.append(l)
        rhs.append(r)
        ratios.append(l / r)
    conclusive = len(grid) >= 2
    return TailReport("infinity", grid, lhs, rhs, ratios, conclusive=conclusive)
