"""Exact laws used as oracles: Gamma, Beta, powers of e(1), Mittag-Leffler and friends.

Mittag-Leffler variables are handled through Kanter's representation of a
positive ``gamma``-stable variable ``tau``:

    tau = (A(U) / E)**((1 - gamma) / gamma),
    A(u) = (sin(gamma u)**gamma sin((1-gamma) u)**(1-gamma) / sin(u))**(1/(1-gamma)),

with ``U`` uniform on ``]0, pi[`` and ``E`` standard exponential.  Hence
``M = tau**-gamma = (E / A(U))**(1-gamma)``, which gives an exact sampler,
``P(M > x) = E[exp(-A(U) x**(1/(1-gamma)))]`` and the density by
differentiation, all as smooth integrals over ``]0, pi[``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .errors import InstabilityError, ParameterRangeError
from .measure import quad

SERIES_TERM_CUTOFF = 1e-14
# beyond this term magnitude the alternating series loses too many digits
SERIES_MAX_TERM = 1e3


class ExactLaw:
    """Interface: ``pdf``, ``sf``, ``cdf``, ``moment`` and ``sample``."""

    name = "law"
    support = (0.0, math.inf)

    def pdf(self, x):
        raise NotImplementedError

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.array([quad(lambda y: float(self.pdf(y)), xi, self.support[1], 1e-10)[0]
                        if xi > self.support[0] else 1.0 for xi in x.ravel()]).reshape(x.shape)
        return float(out) if out.ndim == 0 else out

    def cdf(self, x):
        return 1.0 - self.sf(x)

    def moment(self, n):
        raise NotImplementedError

    def sample(self, rng, size):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.params()})"

    def params(self):
        return {}


@dataclass(repr=False)
class GammaLaw(ExactLaw):
    shape: float
    rate: float = 1.0
    name = "gamma"

    def _d(self):
        return stats.gamma(self.shape, scale=1.0 / self.rate)

    def params(self):
        return {"shape": self.shape, "rate": self.rate}

    def pdf(self, x):
        return self._d().pdf(x)

    def sf(self, x):
        return self._d().sf(x)

    def moment(self, n):
        return math.exp(special.gammaln(self.shape + n) - special.gammaln(self.shape)) / self.rate ** n

    def sample(self, rng, size):
        return rng.gamma(self.shape, 1.0 / self.rate, size)


@dataclass(repr=False)
class BetaLaw(ExactLaw):
    p: float
    q: float
    name = "beta"
    support = (0.0, 1.0)

    def params(self):
        return {"p": self.p, "q": self.q}

    def pdf(self, x):
        return stats.beta(self.p, self.q).pdf(x)

    def sf(self, x):
        return stats.beta(self.p, self.q).sf(x)

    def moment(self, n):
        return math.exp(special.betaln(self.p + n, self.q) - special.betaln(self.p, self.q))

    def sample(self, rng, size):
        return rng.beta(self.p, self.q, size)


@dataclass(repr=False)
class ExpPower(ExactLaw):
    """``scale * e(1)**exponent``."""

    exponent: float
    scale: float = 1.0
    name = "exp-power"

    def params(self):
        return {"exponent": self.exponent, "scale": self.scale}

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        p = self.exponent
        z = np.where(x > 0, x, 1.0) / self.scale
        with np.errstate(over="ignore", divide="ignore"):
            val = z ** (1.0 / p - 1.0) * np.exp(-z ** (1.0 / p)) / (p * self.scale)
        return np.where(x > 0, val, 0.0)

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, np.exp(-(np.maximum(x, 0.0) / self.scale) ** (1.0 / self.exponent)), 1.0)

    def moment(self, n):
        return self.scale ** n * special.gamma(1.0 + self.exponent * n)

    def sample(self, rng, size):
        return self.scale * rng.exponential(size=size) ** self.exponent


# --------------------------------------------------------------------------
# Mittag-Leffler machinery
# --------------------------------------------------------------------------

def kanter_A(u, gamma):
    """Kanter's function on ``]0, pi[`` (increasing from ``A(0+)`` to ``+inf``)."""
    u = np.asarray(u, dtype=float)
    g = gamma
    with np.errstate(divide="ignore"):
        la = (g * np.log(np.sin(g * u)) + (1 - g) * np.log(np.sin((1 - g) * u)) - np.log(np.sin(u))) / (1 - g)
    return np.exp(la)


def kanter_A0(gamma):
    return (gamma ** gamma * (1 - gamma) ** (1 - gamma)) ** (1.0 / (1 - gamma))


def _check_gamma(gamma):
    if not 0.0 < gamma < 1.0:
        raise ParameterRangeError(f"need 0 < gamma < 1, got {gamma}")


def _kanter_mean(gamma, f, tol=1e-11):
    """``(1/pi) int_0^pi f(A(u)) du`` with ``A`` evaluated for ``gamma``."""
    def integrand(u):
        a = float(kanter_A(u, gamma))
        return f(a) if np.isfinite(a) else 0.0
    val, _ = quad(integrand, 0.0, math.pi, tol)
    return val / math.pi


def mittag_leffler_sf(gamma, x):
    """``P(M > x)`` for the Mittag-Leffler law of index ``gamma``."""
    _check_gamma(gamma)
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape)
    for i, xi in np.ndenumerate(x):
        if xi <= 0:
            out[i] = 1.0
        else:
            y = xi ** (1.0 / (1 - gamma))
            out[i] = _kanter_mean(gamma, lambda a: math.exp(-a * y))
    return float(out) if out.ndim == 0 else out


def _ml_series(gamma, x):
    """Partial sums of the power series; returns ``(value, max_term)``."""
    total, biggest = 0.0, 0.0
    lx = math.log(x) if x > 0 else -math.inf
    for i in range(1, 2000):
        s = math.sin(math.pi * gamma * i)
        lmag = (i - 1) * lx + special.gammaln(gamma * i + 1) - special.gammaln(i + 1)
        term = (-1) ** (i - 1) * math.exp(lmag) * s
        total += term
        biggest = max(biggest, math.exp(lmag))
        if i > 5 and math.exp(lmag) < SERIES_TERM_CUTOFF * max(abs(total), 1e-300):
            break
        if lmag > math.log(1e15):
            break
    return total / (math.pi * gamma), biggest


def mittag_leffler_density(gamma, x, tol=SERIES_TERM_CUTOFF, return_regime=False):
    """Density ``g_gamma`` of the Mittag-Leffler law (moments ``n!/Gamma(gamma n + 1)``).

    Small and moderate ``x`` use the alternating power series.  Once its
    terms exceed ``SERIES_MAX_TERM`` the Kanter integral is used instead;
    the regime is reported when ``return_regime`` is set.
    """
    _check_gamma(gamma)
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape)
    regimes = np.empty(x.shape, dtype=object)
    c = 1.0 / (1 - gamma)
    for i, xi in np.ndenumerate(x):
        if xi <= 0:
            out[i], regimes[i] = (1.0 / special.gamma(1 - gamma) if xi == 0 else 0.0), "series"
            continue
        val, biggest = _ml_series(gamma, xi)
        if biggest <= SERIES_MAX_TERM:
            out[i], regimes[i] = val, "series"
        else:
            y = xi ** c
            pref = c * xi ** (gamma * c)
            out[i] = pref * _kanter_mean(gamma, lambda a: a * math.exp(-a * y))
            regimes[i] = "kanter"
    if return_regime:
        return (float(out) if out.ndim == 0 else out), (regimes.item() if regimes.ndim == 0 else regimes)
    return float(out) if out.ndim == 0 else out


def sample_mittag_leffler(rng, gamma, size):
    _check_gamma(gamma)
    u = rng.uniform(0.0, math.pi, size)
    e = rng.exponential(size=size)
    return (e / kanter_A(u, gamma)) ** (1 - gamma)


def sample_stable(rng, gamma, size):
    """Positive ``gamma``-stable with Laplace transform ``exp(-s**gamma)``."""
    _check_gamma(gamma)
    u = rng.uniform(0.0, math.pi, size)
    e = rng.exponential(size=size)
    return (kanter_A(u, gamma) / e) ** ((1 - gamma) / gamma)


def sample_size_biased_mittag_leffler(rng, gamma, size):
    """Exact draw from ``x P(M in dx) / E[M]``.

    Size-biasing ``(E/A(U))**(1-gamma)`` makes ``E`` Gamma(2-gamma) and gives
    ``U`` the density proportional to ``A(u)**(gamma-1)``, which is sampled by
    rejection from the uniform law since ``A`` is increasing.
    """
    _check_gamma(gamma)
    out = np.empty(size)
    a0 = kanter_A0(gamma)
    filled = 0
    while filled < size:
        m = max(2 * (size - filled), 64)
        u = rng.uniform(0.0, math.pi, m)
        acc = rng.uniform(size=m) < (kanter_A(u, gamma) / a0) ** (gamma - 1)
        u = u[acc][: size - filled]
        e = rng.gamma(2 - gamma, 1.0, u.size)
        out[filled:filled + u.size] = (e / kanter_A(u, gamma)) ** (1 - gamma)
        filled += u.size
    return out


@dataclass(repr=False)
class MittagLeffler(ExactLaw):
    """``scale * tau_gamma**-gamma``."""

    gamma: float
    scale: float = 1.0
    name = "mittag-leffler"

    def __post_init__(self):
        _check_gamma(self.gamma)

    def params(self):
        return {"gamma": self.gamma, "scale": self.scale}

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return mittag_leffler_density(self.gamma, x / self.scale) / self.scale

    def sf(self, x):
        return mittag_leffler_sf(self.gamma, np.asarray(x, dtype=float) / self.scale)

    def moment(self, n):
        return self.scale ** n * math.exp(special.gammaln(n + 1) - special.gammaln(self.gamma * n + 1))

    def sample(self, rng, size):
        return self.scale * sample_mittag_leffler(rng, self.gamma, size)


@dataclass(repr=False)
class SizeBiasedMittagLeffler(ExactLaw):
    """``scale * M*`` with ``M*`` the size-biased Mittag-Leffler variable."""

    gamma: float
    scale: float = 1.0
    name = "size-biased-mittag-leffler"

    def __post_init__(self):
        _check_gamma(self.gamma)

    def params(self):
        return {"gamma": self.gamma, "scale": self.scale}

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        z = x / self.scale
        return special.gamma(1 + self.gamma) * z * mittag_leffler_density(self.gamma, z) / self.scale

    def sf(self, x):
        # E[M 1{M > z}] / E[M] = Gamma(1+g) E_U[A^{g-1} Gamma(2-g, A z^{1/(1-g)})]
        g = self.gamma
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape)
        g2 = special.gamma(2 - g)
        for i, xi in np.ndenumerate(x):
            if xi <= 0:
                out[i] = 1.0
                continue
            y = (xi / self.scale) ** (1.0 / (1 - g))
            out[i] = special.gamma(1 + g) * g2 * _kanter_mean(
                g, lambda a: a ** (g - 1) * special.gammaincc(2 - g, a * y))
        return float(out) if out.ndim == 0 else out

    def moment(self, n):
        g = self.gamma
        return self.scale ** n * math.exp(special.gammaln(n + 2) + special.gammaln(1 + g)
                                          - special.gammaln((n + 1) * g + 1))

    def sample(self, rng, size):
        return self.scale * sample_size_biased_mittag_leffler(rng, self.gamma, size)


@dataclass(repr=False)
class StablePower(ExactLaw):
    """``tau_gamma**exponent`` for ``exponent < 0``; a power of a Mittag-Leffler variable."""

    gamma: float
    exponent: float
    name = "stable-power"

    def __post_init__(self):
        _check_gamma(self.gamma)
        if not self.exponent < 0:
            raise ParameterRangeError("StablePower needs a negative exponent")
        self._q = -self.exponent / self.gamma    # tau**p = M**q

    def params(self):
        return {"gamma": self.gamma, "exponent": self.exponent}

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        q = self._q
        z = np.where(x > 0, x, 1.0) ** (1.0 / q)
        val = mittag_leffler_density(self.gamma, z) * z / (q * np.where(x > 0, x, 1.0))
        return np.where(x > 0, val, 0.0)

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return mittag_leffler_sf(self.gamma, np.maximum(x, 0.0) ** (1.0 / self._q))

    def moment(self, n):
        # E[M^s] = Gamma(1+s)/Gamma(1+gamma s)
        s = self._q * n
        return math.exp(special.gammaln(1 + s) - special.gammaln(1 + self.gamma * s))

    def sample(self, rng, size):
        return sample_stable(rng, self.gamma, size) ** self.exponent


# --------------------------------------------------------------------------
# Poisson subordinator (single Dirac) laws
# --------------------------------------------------------------------------

def _qpoch_log(r, k):
    """``log |(r; r)_k|`` for ``0 < r < 1`` (``k = inf`` allowed)."""
    if k == math.inf:
        j = np.arange(1, 1 + int(min(10000, 40 / -math.log(r) + 50)))
    else:
        j = np.arange(1, k + 1)
    return float(np.sum(np.log1p(-r ** j)))


@dataclass(repr=False)
class SeriesDensity(ExactLaw):
    """``I = sum_j q**-j e_j`` with rates ``q**j``, ``q > 1`` (hypoexponential series)."""

    q: float
    name = "series-density"

    def __post_init__(self):
        if not self.q > 1:
            raise ParameterRangeError("SeriesDensity needs q > 1")
        r = 1.0 / self.q
        base = -_qpoch_log(r, math.inf)
        # c_i = (-1)^i / ((r;r)_inf prod_{j<=i} (q^j - 1))
        logs, signs = [], []
        acc = base
        lq = math.log(self.q)
        for i in range(0, 400):
            if i > 0:
                acc -= math.log(math.expm1(i * lq))
            logs.append(acc)
            signs.append(-1.0 if i % 2 else 1.0)
            if acc + i * lq < math.log(SERIES_TERM_CUTOFF) - 5 and i > 2:
                break
        self._logc = np.array(logs)
        self._sign = np.array(signs)
        self._rates = self.q ** np.arange(len(logs))

    @property
    def terms(self):
        return self._logc.size

    @property
    def coefficients(self):
        return self._sign * np.exp(self._logc)

    def params(self):
        return {"q": self.q}

    def _sum(self, x, with_rate):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lr = np.log(self._rates)
        expo = self._logc[None, :] + (lr[None, :] if with_rate else 0.0) - x[:, None] * self._rates[None, :]
        terms = self._sign[None, :] * np.exp(expo)
        total = terms.sum(axis=1)
        biggest = np.abs(terms).max(axis=1)
        if np.any(total < -1e-11 * biggest - 1e-300):
            raise InstabilityError("series cancellation exceeded the precision budget")
        return np.maximum(total, 0.0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > 0, self._sum(np.maximum(x, 0.0), True).reshape(x.shape), 0.0)
        return float(out) if out.ndim == 0 else out

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > 0, np.minimum(self._sum(np.maximum(x, 0.0), False).reshape(x.shape), 1.0), 1.0)
        return float(out) if out.ndim == 0 else out

    def moment(self, n):
        r = 1.0 / self.q
        # E[I^n] = n! / prod_{i<=n} (1 - r^i)
        return math.exp(special.gammaln(n + 1) - _qpoch_log(r, n))

    def sample(self, rng, size):
        nterm = int(math.ceil(40.0 / math.log(self.q))) + 1
        rates = self.q ** np.arange(nterm)
        tot = np.zeros(size)
        for lam in rates:
            tot += rng.exponential(1.0 / lam, size)
        # remainder mean sum_{j >= nterm} q^-j
        return tot + self.q ** -nterm / (1 - 1.0 / self.q)


@dataclass(repr=False)
class LatticeLaw(ExactLaw):
    """``r**N`` with ``P(N = k) = (r;r)_inf r**k / (r;r)_k`` (law of R for a Poisson subordinator)."""

    r: float
    name = "lattice"
    support = (0.0, 1.0)

    def __post_init__(self):
        if not 0 < self.r < 1:
            raise ParameterRangeError("LatticeLaw needs 0 < r < 1")
        kmax = int(min(5000, 60 / -math.log(self.r) + 50))
        ks = np.arange(kmax)
        lp = _qpoch_log(self.r, math.inf) + ks * math.log(self.r) - np.array([_qpoch_log(self.r, k) for k in ks])
        self.values = self.r ** ks
        self.probs = np.exp(lp)

    def params(self):
        return {"r": self.r}

    @property
    def atom_at_one(self):
        return float(self.probs[0])

    def pdf(self, x):
        raise NotImplementedError("lattice law has no density")

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        out = (self.probs[None, :] * (self.values[None, :] > np.atleast_1d(x)[:, None])).sum(axis=1)
        return float(out[0]) if x.ndim == 0 else out.reshape(x.shape)

    def moment(self, n):
        return float(np.sum(self.probs * self.values ** n))

    def sample(self, rng, size):
        idx = rng.choice(self.values.size, size=size, p=self.probs / self.probs.sum())
        return self.values[idx]
