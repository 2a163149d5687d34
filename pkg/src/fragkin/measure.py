"""Fragmentation measures, their Lévy images and the scalar rate functions.

A fragmentation measure ``B`` on ``]0, 1[`` together with a self-similarity
index ``alpha < 0`` determines a zero-drift subordinator ``xi`` whose Lévy
measure is the image of ``x B(dx)`` under ``x -> -ln x``.  Everything the
asymptotic results need is a functional of its Laplace exponent

    phi(t) = int_0^1 (1 - x**t) x B(dx).

Measures are sums of components (parametric densities or Dirac atoms).  An
optional ``dust_rate`` adds total disintegration into dust, i.e. killing of
the subordinator; it enters ``phi`` as a constant on ``]0, inf[``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, interpolate, optimize, special

from .errors import DomainError, InvalidMeasureError, QuadratureError

DEFAULT_QUAD_TOL = 1e-10
_BRACKET_GUARD = 1e300
_LN2 = math.log(2.0)


_Y_SPLIT = 40.0
# densities given in u overflow near u = exp(-354); the far tail of Pi stops here
_Y_FAR = 300.0


def quad(f, a, b, tol=DEFAULT_QUAD_TOL, points=None):
    """Adaptive Gauss-Kronrod integration that refuses to return silently on failure."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(f, a, b, epsabs=0.0, epsrel=tol, limit=1000,
                             points=points, full_output=1)
    val, err = out[0], out[1]
    if len(out) == 4 or not np.isfinite(val):
        achieved = err / abs(val) if val else err
        # Roundoff-limited integrals are acceptable when the error estimate is tiny.
        if np.isfinite(val) and err <= 1e3 * tol * max(abs(val), 1e-300):
            return val, err
        raise QuadratureError(
            f"quadrature did not reach rtol={tol:g} on [{a}, {b}] (achieved {achieved:.3g})",
            achieved=achieved,
        )
    return val, err


def _log_slope(f, x1, x2):
    f1, f2 = f(x1), f(x2)
    if f1 <= 0 or f2 <= 0:
        return -np.inf
    return (math.log(f2) - math.log(f1)) / (math.log(x2) - math.log(x1))


# --------------------------------------------------------------------------
# components
# --------------------------------------------------------------------------

class Component:
    """Additive piece of a fragmentation measure.

    Subclasses override the closed forms they know; the defaults integrate
    numerically.  ``levy_density`` is the density of the Lévy image at
    ``y = -ln x``.
    """

    family = "component"
    beta: Optional[float] = None
    finite_activity = False

    def params(self) -> dict:
        return {}

    # -- B itself ---------------------------------------------------------
    def density(self, u):
        raise NotImplementedError

    def levy_density(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(all="ignore"):
            val = np.exp(-2.0 * y) * self.density(np.exp(-y))
        return np.where(np.isnan(val), 0.0, val)

    # -- integrals of B ---------------------------------------------------
    def _pi(self, y):
        v = float(self.levy_density(y))
        return v if v == v else 0.0

    def integrate_levy(self, g, tol=DEFAULT_QUAD_TOL) -> float:
        """``int_0^inf g(y) Pi(dy)`` with ``y = -ln(1 - v)`` on the small-jump side."""
        left, _ = quad(lambda y: g(y) * self._pi(y), _LN2, _Y_SPLIT, tol)
        # z = ln y on the far tail copes with algebraic decay of Pi
        far, _ = quad(lambda z: g(math.exp(z)) * self._pi(math.exp(z)) * math.exp(z), math.log(_Y_SPLIT), math.log(_Y_FAR), tol)
        left += far
        right, _ = quad(lambda v: g(-math.log1p(-v)) * (1.0 - v) * float(self.density(1.0 - v)),
                        0.0, 0.5, tol)
        return left + right

    def integrate_x(self, g, tol=DEFAULT_QUAD_TOL) -> float:
        """``int_0^1 g(x) x B(dx)`` for a scalar function ``g``."""
        return self.integrate_levy(lambda y: g(math.exp(-y)), tol)

    def phi(self, t, tol=DEFAULT_QUAD_TOL):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(t)
        for i, ti in enumerate(t):
            if ti == 0.0:
                out[i] = 0.0
            elif np.isinf(ti):
                out[i] = self.first_moment(tol)
            else:
                out[i] = self.integrate_levy(lambda y: -math.expm1(-ti * y), tol)
        return out

    def _divergent_near_one(self, power):
        # is int_0 v**power b(1-v) dv infinite?
        f = lambda v: float(self.density(1.0 - v))
        slope = _log_slope(f, 1e-12, 1e-10)
        return slope + power <= -1.0 + 1e-3

    def _divergent_at_infinity(self, k):
        # is int^inf y**k Pi(dy) infinite?
        y0, y1, y2 = _Y_FAR / 4, _Y_FAR / 2, _Y_FAR
        if self._pi(y2) == 0.0:
            return False
        s1, s2 = _log_slope(self._pi, y0, y1), _log_slope(self._pi, y1, y2)
        # a power law keeps its log-log slope; exponential decay doubles it
        if s2 < 1.5 * s1 - 1.0:
            return False
        return s2 + k >= -1.0 - 1e-3

    def first_moment(self, tol=DEFAULT_QUAD_TOL) -> float:
        """Total Lévy mass ``int x B(dx)``; infinite for infinite activity."""
        if self._divergent_near_one(0.0) or self._divergent_at_infinity(0):
            return math.inf
        return self.integrate_levy(lambda y: 1.0, tol)

    def kappa(self, tol=DEFAULT_QUAD_TOL) -> float:
        """Mean of the Lévy measure, ``int |ln x| x B(dx)``."""
        if self._divergent_at_infinity(1):
            return math.inf
        return self.integrate_levy(lambda y: y, tol)

    def near_one_mass(self, tol=DEFAULT_QUAD_TOL) -> float:
        """``int B(dx) / (1 - x)`` over ``[1/2, 1[`` (finiteness decides the atom of the limit law)."""
        if self._divergent_near_one(-1.0):
            return math.inf
        val, _ = quad(lambda v: float(self.density(1.0 - v)) / v, 0.0, 0.5, tol)
        return val

    def check(self, tol=DEFAULT_QUAD_TOL):
        """Return ``int y(1-y) B(dy)``; raise when it is infinite or B is null."""
        if self._divergent_near_one(1.0):
            raise InvalidMeasureError(f"{self.family}: int y(1-y) B(dy) diverges near 1")
        if self._divergent_at_infinity(0):
            raise InvalidMeasureError(f"{self.family}: int y B(dy) diverges near 0")
        try:
            val = self.integrate_x(lambda x: 1.0 - x, tol)
        except QuadratureError as exc:
            raise InvalidMeasureError(f"{self.family}: int y(1-y) B(dy) not finite") from exc
        if not np.isfinite(val) or val <= 0:
            raise InvalidMeasureError(f"{self.family}: B must have positive finite int y(1-y) B(dy)")
        return val

    # -- Lévy tail ----------------------------------------------------------
    def levy_tail(self, y):
        """``Pi(]y, inf[)`` for the finite part of the Lévy image."""
        return self._table().tail(y)

    def levy_tail_inverse(self, p):
        return self._table().inverse(p)

    def small_jump_moment(self, eps, k=1, tol=DEFAULT_QUAD_TOL) -> float:
        """``int_0^eps y**k Pi(dy)``."""
        if eps <= 0:
            return 0.0
        def f(z):
            with np.errstate(all="ignore"):
                v = math.exp((k + 1) * z) * float(self.levy_density(math.exp(z)))
            return v if np.isfinite(v) else 0.0
        val, _ = quad(f, -700.0, math.log(eps), tol)
        return val

    def _table(self):
        tab = getattr(self, "_tail_table", None)
        if tab is None:
            tab = _TabulatedTail(self.levy_density)
            object.__setattr__(self, "_tail_table", tab)
        return tab


class _TabulatedTail:
    """Monotone (PCHIP, log-log) table of the Lévy tail for densities without a closed form."""

    def __init__(self, levy_density, y_lo=1e-10, y_hi=60.0, n=1200):
        ys = np.geomspace(y_lo, y_hi, n)
        pieces = np.empty(n - 1)
        f = lambda y: float(levy_density(y))
        for i in range(n - 1):
            # densities given in u lose relative precision as u -> 1, so accept roundoff here
            pieces[i] = integrate.quad(f, ys[i], ys[i + 1], epsabs=0.0, epsrel=1e-9, limit=200)[0]
        far, _ = quad(lambda y: float(levy_density(y)), y_hi, np.inf, 1e-9)
        tails = np.concatenate([np.cumsum(pieces[::-1])[::-1] + far, [far]])
        keep = tails > 0
        self.ys, self.tails = ys[keep], tails[keep]
        lt = np.log(self.tails)
        self._fwd = interpolate.PchipInterpolator(np.log(self.ys), lt, extrapolate=True)
        self._inv = interpolate.PchipInterpolator(lt[::-1], np.log(self.ys)[::-1], extrapolate=False)

    def tail(self, y):
        return np.exp(self._fwd(np.log(np.asarray(y, dtype=float))))

    def inverse(self, p):
        p = np.asarray(p, dtype=float)
        lp = np.clip(np.log(p), np.log(self.tails[-1]), np.log(self.tails[0]))
        return np.exp(self._inv(lp))


class Dirac(Component):
    """Atom of weight ``w`` at ``a``: ``B = w delta_a``.  ``a**-1 delta_a`` gives the Poisson case."""

    family = "dirac"
    finite_activity = True
    beta = 0.0

    def __init__(self, location, weight=None):
        a = float(location)
        if not 0.0 < a < 1.0:
            raise InvalidMeasureError(f"Dirac location must lie in ]0,1[, got {a}")
        w = 1.0 / a if weight is None else float(weight)
        if not w > 0:
            raise InvalidMeasureError("Dirac weight must be positive")
        self.location, self.weight = a, w
        self.jump = -math.log(a)
        self.rate = w * a

    def params(self):
        return {"a": self.location, "weight": self.weight}

    def density(self, u):
        raise NotImplementedError("atoms have no density")

    def levy_density(self, y):
        return np.zeros_like(np.asarray(y, dtype=float))

    def integrate_x(self, g, tol=DEFAULT_QUAD_TOL):
        return self.rate * g(self.location)

    def phi(self, t, tol=DEFAULT_QUAD_TOL):
        t = np.asarray(t, dtype=float)
        return self.rate * -np.expm1(t * math.log(self.location))

    def first_moment(self, tol=DEFAULT_QUAD_TOL):
        return self.rate

    def kappa(self, tol=DEFAULT_QUAD_TOL):
        return self.rate * self.jump

    def near_one_mass(self, tol=DEFAULT_QUAD_TOL):
        return self.weight / (1.0 - self.location)

    def check(self, tol=DEFAULT_QUAD_TOL):
        return self.rate * (1.0 - self.location)

    def levy_tail(self, y):
        y = np.asarray(y, dtype=float)
        return np.where(y < self.jump, self.rate, 0.0)

    def levy_tail_inverse(self, p):
        return np.full_like(np.asarray(p, dtype=float), self.jump)

    def small_jump_moment(self, eps, k=1, tol=DEFAULT_QUAD_TOL):
        return self.rate * self.jump ** k if self.jump < eps else 0.0


class Example1Density(Component):
    """``b(u) = b u**(b-2)``; Lévy image ``b exp(-b y) dy``."""

    family = "example1"
    finite_activity = True
    beta = 0.0

    def __init__(self, b):
        self.b = float(b)
        if not self.b > 0:
            raise InvalidMeasureError("example1 requires b > 0")

    def params(self):
        return {"b": self.b}

    def density(self, u):
        return self.b * np.asarray(u, dtype=float) ** (self.b - 2.0)

    def levy_density(self, y):
        return self.b * np.exp(-self.b * np.asarray(y, dtype=float))

    def phi(self, t, tol=DEFAULT_QUAD_TOL):
        t = np.asarray(t, dtype=float)
        with np.errstate(invalid="ignore"):
            return np.where(np.isinf(t), 1.0, t / (t + self.b))

    def first_moment(self, tol=DEFAULT_QUAD_TOL):
        return 1.0

    def kappa(self, tol=DEFAULT_QUAD_TOL):
        return 1.0 / self.b

    def near_one_mass(self, tol=DEFAULT_QUAD_TOL):
        return math.inf

    def check(self, tol=DEFAULT_QUAD_TOL):
        return 1.0 / (self.b + 1.0)

    def levy_tail(self, y):
        return np.exp(-self.b * np.asarray(y, dtype=float))

    def levy_tail_inverse(self, p):
        return -np.log(np.asarray(p, dtype=float)) / self.b

    def small_jump_moment(self, eps, k=1, tol=DEFAULT_QUAD_TOL):
        # b int_0^eps y^k e^{-by} dy = b^{-k} gamma_lower(k+1, b eps)
        return special.gammainc(k + 1, self.b * eps) * special.gamma(k + 1) / self.b ** k


class Example2Density(Component):
    """``b(u) = |a| / Gamma(1-g) u**(|a|/g - 2) (1 - u**(|a|/g))**(-g-1)`` (as printed).

    For this measure ``phi(t) = Gamma(s+1)/Gamma(s+1-g) - 1/Gamma(1-g)`` with
    ``s = t g/|a|``.  The Mittag-Leffler law for the exponential functional
    additionally needs a dust rate ``1/Gamma(1-g)``; see :func:`catalog`.
    """

    family = "example2"

    def __init__(self, gamma, alpha):
        self.g, self.alpha = float(gamma), float(alpha)
        if not 0.0 < self.g < 1.0:
            raise InvalidMeasureError("example2 requires 0 < gamma < 1")
        if not self.alpha < 0:
            raise InvalidMeasureError("example2 requires alpha < 0")
        self.a = abs(self.alpha)
        self.c = self.a / self.g
        self.beta = self.g

    def params(self):
        return {"gamma": self.g}

    def density(self, u):
        u = np.asarray(u, dtype=float)
        return (self.a / special.gamma(1 - self.g) * u ** (self.c - 2.0)
                * (-np.expm1(self.c * np.log(u))) ** (-self.g - 1.0))

    def levy_density(self, y):
        y = np.asarray(y, dtype=float)
        return self.a * np.exp(-self.c * y) / (special.gamma(1 - self.g) * (-np.expm1(-self.c * y)) ** (self.g + 1))

    def phi(self, t, tol=DEFAULT_QUAD_TOL):
        t = np.asarray(t, dtype=float)
        s = t * self.g / self.a
        with np.errstate(invalid="ignore", over="ignore"):
            val = special.poch(s + 1 - self.g, self.g) - 1.0 / special.gamma(1 - self.g)
        return np.where(t == 0, 0.0, np.where(np.isinf(t), np.inf, val))

    def first_moment(self, tol=DEFAULT_QUAD_TOL):
        return math.inf

    def kappa(self, tol=DEFAULT_QUAD_TOL):
        return self.g / self.a * (special.digamma(1.0) - special.digamma(1 - self.g)) / special.gamma(1 - self.g)

    def near_one_mass(self, tol=DEFAULT_QUAD_TOL):
        return math.inf

    def check(self, tol=DEFAULT_QUAD_TOL):
        # int y(1-y) B(dy) = phi(1)
        return float(self.phi(1.0))

    def levy_tail(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore"):
            return ((-np.expm1(-self.c * y)) ** (-self.g) - 1.0) / special.gamma(1 - self.g)

    def levy_tail_inverse(self, p):
        p = np.asarray(p, dtype=float)
        w = (1.0 + special.gamma(1 - self.g) * p) ** (-1.0 / self.g)
        with np.errstate(divide="ignore"):
            return -np.log1p(-w) / self.c


class Example3Density(Component):
    """``b(u) = |a| g / ((1-g) Gamma(2-g)) u**(g|a|/(1-g) - 2) (1 - u**(|a|/(1-g)))**(-g-1)``.

    ``phi(t) = Gamma(s+g) / ((1-g) Gamma(s))`` with ``s = t (1-g)/|a|``, so the
    exponential functional is ``e(1)**(1-g)``.
    """

    family = "example3"

    def __init__(self, gamma, alpha):
        self.g, self.alpha = float(gamma), float(alpha)
        if not 0.0 < self.g < 1.0:
            raise InvalidMeasureError("example3 requires 0 < gamma < 1")
        if not self.alpha < 0:
            raise InvalidMeasureError("example3 requires alpha < 0")
        self.a = abs(self.alpha)
        self.c = self.a / (1.0 - self.g)
        self.beta = self.g
        self.const = self.a * self.g / ((1.0 - self.g) * special.gamma(2.0 - self.g))

    def params(self):
        return {"gamma": self.g}

    def density(self, u):
        u = np.asarray(u, dtype=float)
        return self.const * u ** (self.g * self.c - 2.0) * (-np.expm1(self.c * np.log(u))) ** (-self.g - 1.0)

    def levy_density(self, y):
        y = np.asarray(y, dtype=float)
        # e^{cy}/(e^{cy}-1)^{1+g} written to avoid overflow
        return self.const * np.exp(-self.g * self.c * y) / (-np.expm1(-self.c * y)) ** (1.0 + self.g)

    def phi(self, t, tol=DEFAULT_QUAD_TOL):
        t = np.asarray(t, dtype=float)
        s = t * (1.0 - self.g) / self.a
        with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
            val = special.poch(s, self.g) / (1.0 - self.g)
        return np.where(t == 0, 0.0, np.where(np.isinf(t), np.inf, val))

    def first_moment(self, tol=DEFAULT_QUAD_TOL):
        return math.inf

    def kappa(self, tol=DEFAULT_QUAD_TOL):
        return special.gamma(self.g) / self.a

    def near_one_mass(self, tol=DEFAULT_QUAD_TOL):
        return math.inf

    def check(self, tol=DEFAULT_QUAD_TOL):
        return float(self.phi(1.0))

    def levy_tail(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore"):
            return np.expm1(self.c * y) ** (-self.g) / special.gamma(2.0 - self.g)

    def levy_tail_inverse(self, p):
        p = np.asarray(p, dtype=float)
        return np.log1p((special.gamma(2.0 - self.g) * p) ** (-1.0 / self.g)) / self.c


class Example4Density(Component):
    """``b(u) = |a| / Gamma(2+a) u**(|a|-2) (1-u)**(a-1)`` for ``-1 < a < 0``."""

    family = "example4"

    def __init__(self, alpha):
        self.alpha = float(alpha)
        if not -1.0 < self.alpha < 0.0:
            raise InvalidMeasureError("example4 requires -1 < alpha < 0")
        self.a = abs(self.alpha)
        self.beta = self.a

    def density(self, u):
        u = np.asarray(u, dtype=float)
        return self.a / special.gamma(2.0 - self.a) * u ** (self.a - 2.0) * (1.0 - u) ** (-self.a - 1.0)

    def levy_density(self, y):
        y = np.asarray(y, dtype=float)
        return self.a * np.exp(-self.a * y) / (special.gamma(2.0 - self.a) * (-np.expm1(-y)) ** (1.0 + self.a))

    def phi(self, t, tol=DEFAULT_QUAD_TOL):
        t = np.asarray(t, dtype=float)
        with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
            val = special.poch(t, self.a) / (1.0 - self.a)
        return np.where(t == 0, 0.0, np.where(np.isinf(t), np.inf, val))

    def first_moment(self, tol=DEFAULT_QUAD_TOL):
        return math.inf

    def kappa(self, tol=DEFAULT_QUAD_TOL):
        return special.gamma(self.a) / (1.0 - self.a)

    def near_one_mass(self, tol=DEFAULT_QUAD_TOL):
        return math.inf

    def check(self, tol=DEFAULT_QUAD_TOL):
        return float(self.phi(1.0))

    def levy_tail(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore"):
            return np.expm1(y) ** (-self.a) / special.gamma(2.0 - self.a)

    def levy_tail_inverse(self, p):
        p = np.asarray(p, dtype=float)
        return np.log1p((special.gamma(2.0 - self.a) * p) ** (-1.0 / self.a))


class GenericDensity(Component):
    """User density on ``]0,1[`` given as a vectorised callable; everything by quadrature."""

    family = "density"

    def __init__(self, fn: Callable, name="density", beta=None, params=None):
        self._fn = fn
        self.name = name
        self.beta = beta
        self._params = dict(params or {})
        probe = np.asarray(fn(np.array([0.25, 0.5, 0.75])), dtype=float)
        if probe.shape != (3,) or np.any(probe < 0) or not np.all(np.isfinite(probe)):
            raise InvalidMeasureError(f"{name}: density must be a nonnegative vectorised function")
        self.finite_activity = not self._divergent_near_one(0.0)

    def params(self):
        return dict(self._params)

    def density(self, u):
        return np.asarray(self._fn(np.asarray(u, dtype=float)), dtype=float)


_EXPR_NAMESPACE = {name: getattr(np, name) for name in (
    "exp", "log", "log1p", "expm1", "sqrt", "sin", "cos", "pi", "abs", "power", "where")}
_EXPR_NAMESPACE["gamma"] = special.gamma


def density_from_expression(expr: str, params=None, beta=None) -> GenericDensity:
    """Compile a density expression in the variable ``u`` (numpy functions allowed)."""
    code = compile(expr, "<density-expr>", "eval")
    for name in code.co_names:
        if name not in _EXPR_NAMESPACE and name != "u" and name not in (params or {}):
            raise InvalidMeasureError(f"density-expr: name {name!r} is not allowed")
    scope = dict(_EXPR_NAMESPACE)
    scope.update(params or {})

    def fn(u):
        return eval(code, {"__builtins__": {}}, dict(scope, u=u)) + 0.0 * u

    p = dict(params or {})
    p["expr"] = expr
    return GenericDensity(fn, name="density-expr", beta=beta, params=p)


# --------------------------------------------------------------------------
# the measure
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FragmentationMeasure:
    """Dislocation measure ``B`` (sum of ``components``) with index ``alpha < 0``."""

    components: tuple
    alpha: float
    dust_rate: float = 0.0
    quad_tol: float = DEFAULT_QUAD_TOL

    def __post_init__(self):
        comps = tuple(self.components)
        if isinstance(self.components, Component):
            comps = (self.components,)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "alpha", float(self.alpha))
        if not comps:
            raise InvalidMeasureError("B(]0,1[) must be positive: no components given")
        if not self.alpha < 0:
            raise InvalidMeasureError(f"only shattering regimes alpha < 0 are supported, got {self.alpha}")
        if self.dust_rate < 0:
            raise InvalidMeasureError("dust_rate must be nonnegative")
        for c in comps:
            c.check(self.quad_tol)

    @property
    def abs_alpha(self):
        return -self.alpha

    @property
    def finite_activity(self):
        return all(c.finite_activity for c in self.components)

    @property
    def declared_beta(self):
        betas = [c.beta for c in self.components]
        if any(b is None for b in betas):
            return None
        return max(betas)

    @property
    def is_lattice(self):
        """True when the support of B lies in ``{a**n}`` for a single ``a``."""
        if not all(isinstance(c, Dirac) for c in self.components):
            return False
        jumps = sorted(c.jump for c in self.components)
        base = jumps[0]
        for j in jumps[1:]:
            r = Fraction(j / base).limit_denominator(64)
            if abs(float(r) - j / base) > 1e-9:
                return False
        return True

    def scaled(self, c):
        """The measure ``cB`` (same ``alpha``); corresponds to running time ``c`` times faster."""
        comps = []
        for comp in self.components:
            comps.append(_ScaledComponent(comp, c) if not isinstance(comp, _ScaledComponent)
                         else _ScaledComponent(comp.base, comp.factor * c))
        return FragmentationMeasure(tuple(comps), self.alpha, self.dust_rate * c, self.quad_tol)

    def with_dust(self, rate):
        return FragmentationMeasure(self.components, self.alpha, rate, self.quad_tol)

    def to_spec(self) -> dict:
        if len(self.components) == 1:
            spec = {"family": self.components[0].family, **self.components[0].params()}
        else:
            spec = {"family": "mixture",
                    "components": [{"family": c.family, **c.params()} for c in self.components]}
        spec["alpha"] = self.alpha
        if self.dust_rate:
            spec["dust_rate"] = self.dust_rate
        return spec

    @classmethod
    def from_spec(cls, spec: dict) -> "FragmentationMeasure":
        """Build from the JSON schema ``{"family": ..., params..., "alpha": ...}``."""
        if "alpha" not in spec:
            raise InvalidMeasureError("measure spec needs 'alpha'")
        alpha = float(spec["alpha"])
        fam = spec.get("family")
        if fam == "mixture":
            comps = tuple(_component_from_spec(dict(c), alpha) for c in spec.get("components", []))
        else:
            comps = (_component_from_spec(spec, alpha),)
        return cls(comps, alpha, float(spec.get("dust_rate", 0.0)),
                   float(spec.get("quad_tol", DEFAULT_QUAD_TOL)))


class _ScaledComponent(Component):
    def __init__(self, base: Component, factor: float):
        self.base, self.factor = base, float(factor)
        self.family = base.family
        self.beta = base.beta
        self.finite_activity = base.finite_activity

    def params(self):
        return {**self.base.params(), "scale": self.factor}

    def density(self, u):
        return self.factor * self.base.density(u)

    def levy_density(self, y):
        return self.factor * self.base.levy_density(y)

    def integrate_x(self, g, tol=DEFAULT_QUAD_TOL):
        return self.factor * self.base.integrate_x(g, tol)

    def phi(self, t, tol=DEFAULT_QUAD_TOL):
        return self.factor * self.base.phi(t, tol)

    def first_moment(self, tol=DEFAULT_QUAD_TOL):
        return self.factor * self.base.first_moment(tol)

    def kappa(self, tol=DEFAULT_QUAD_TOL):
        return self.factor * self.base.kappa(tol)

    def near_one_mass(self, tol=DEFAULT_QUAD_TOL):
        return self.factor * self.base.near_one_mass(tol)

    def check(self, tol=DEFAULT_QUAD_TOL):
        return self.factor * self.base.check(tol)

    def levy_tail(self, y):
        return self.factor * self.base.levy_tail(y)

    def levy_tail_inverse(self, p):
        return self.base.levy_tail_inverse(np.asarray(p, dtype=float) / self.factor)

    def small_jump_moment(self, eps, k=1, tol=DEFAULT_QUAD_TOL):
        return self.factor * self.base.small_jump_moment(eps, k, tol)


def _component_from_spec(spec: dict, alpha: float) -> Component:
    fam = spec.get("family")
    scale = spec.get("scale")
    if fam == "example1":
        comp = Example1Density(spec.get("b", 1.0))
    elif fam == "example2":
        comp = Example2Density(spec["gamma"], alpha)
    elif fam == "example3":
        comp = Example3Density(spec["gamma"], alpha)
    elif fam == "example4":
        comp = Example4Density(alpha)
    elif fam == "dirac":
        comp = Dirac(spec["a"], spec.get("weight"))
    elif fam == "density-expr":
        extra = {k: v for k, v in spec.items()
                 if k not in ("family", "expr", "alpha", "beta", "scale", "dust_rate")}
        comp = density_from_expression(spec["expr"], extra, spec.get("beta"))
    else:
        raise InvalidMeasureError(f"unknown measure family {fam!r}")
    return _ScaledComponent(comp, scale) if scale is not None else comp


# --------------------------------------------------------------------------
# Lévy image
# --------------------------------------------------------------------------

class LevyMeasureView:
    """The Lévy measure ``Pi`` of the subordinator attached to ``B``.

    ``Pi`` is the image of ``x B(dx)`` by ``x -> -ln x``; dust (killing) is
    kept apart in ``killing_rate`` and is not part of ``Pi(]0, inf[)``.
    """

    def __init__(self, measure: FragmentationMeasure):
        self.measure = measure
        self.components = measure.components
        self.killing_rate = measure.dust_rate

    def integrate(self, g, tol=None) -> float:
        """``int g dPi = int_0^1 g(-ln x) x B(dx)``."""
        tol = tol or self.measure.quad_tol
        return sum(c.integrate_x(lambda x: g(-math.log(x)), tol) for c in self.components)

    @property
    def total_mass(self) -> float:
        return sum(c.first_moment(self.measure.quad_tol) for c in self.components)

    @property
    def mean(self) -> float:
        """``int y Pi(dy)``, equal to ``kappa``."""
        return sum(c.kappa(self.measure.quad_tol) for c in self.components)

    def tail(self, y):
        y = np.asarray(y, dtype=float)
        return sum(c.levy_tail(y) for c in self.components)

    def tail_inverse(self, p):
        """Smallest ``y`` with ``Pi(]y, inf[) <= p`` (scalar root-finding on the summed tail)."""
        if len(self.components) == 1:
            return self.components[0].levy_tail_inverse(p)
        p = float(p)
        f = lambda ly: float(self.tail(math.exp(ly))) - p
        lo, hi = _grow_bracket(f, 0.0, decreasing=True)
        return math.exp(optimize.brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps))

    def small_jump_moment(self, eps, k=1) -> float:
        return sum(c.small_jump_moment(eps, k, self.measure.quad_tol) for c in self.components)

    def jump_sampler(self, eps):
        """Return ``(rate, sizes)``: jump rate above ``eps`` and a map from ``p in ]0, rate]`` to jump sizes."""
        rates = np.array([float(c.levy_tail(eps)) for c in self.components])
        if not np.all(np.isfinite(rates)):
            raise ValueError("infinite jump rate")
        cum = np.cumsum(rates)
        comps = self.components

        def sizes(p):
            p = np.asarray(p, dtype=float)
            if len(comps) == 1:
                return comps[0].levy_tail_inverse(p)
            out = np.empty_like(p)
            which = np.searchsorted(cum, p, side="left").clip(0, len(comps) - 1)
            offset = np.concatenate([[0.0], cum[:-1]])
            for j, comp in enumerate(comps):
                sel = which == j
                if np.any(sel):
                    out[sel] = comp.levy_tail_inverse(np.maximum(p[sel] - offset[j], 1e-300))
            return out

        return float(cum[-1]), sizes


def _cached(B, key, build):
    # measures are immutable, so derived views are memoised on the instance
    cache = B.__dict__.setdefault("_derived", {})
    if key not in cache:
        cache[key] = build()
    return cache[key]


def levy_image(B: FragmentationMeasure) -> LevyMeasureView:
    return _cached(B, "levy", lambda: LevyMeasureView(B))


# --------------------------------------------------------------------------
# Laplace exponent
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LaplaceExponentTable:
    """Evaluator for ``phi`` plus the scalars ``phi(inf)``, ``kappa`` and ``beta``."""

    measure: FragmentationMeasure
    phi_inf: float
    kappa: float
    beta: Optional[float]
    quadrature_tol: float
    dust_rate: float = 0.0

    @property
    def alpha(self):
        return self.measure.alpha

    def phi(self, t):
        """``phi(t)``; scalar in, float out; arrays in, arrays out."""
        t_arr = np.asarray(t, dtype=float)
        val = sum(c.phi(t_arr, self.quadrature_tol) for c in self.measure.components)
        val = np.where(t_arr > 0, val + self.dust_rate, 0.0)
        return float(np.asarray(val).reshape(-1)[0]) if np.ndim(t) == 0 else np.asarray(val).reshape(t_arr.shape)

    __call__ = phi

    @property
    def ratio_infimum(self):
        """Infimum of ``t / phi(t)`` over ``t > 0``: ``1/kappa`` (``0`` with dust)."""
        if self.dust_rate > 0 or math.isinf(self.kappa):
            return 0.0
        return 1.0 / self.kappa

    def check_grid(self, grid=None, slack=None):
        """Count violations of monotonicity, concavity, ``phi(0)=0`` and strict growth of ``t/phi(t)``."""
        grid = np.geomspace(1e-3, 1e4, 200) if grid is None else np.asarray(grid, dtype=float)
        slack = 10 * self.quadrature_tol if slack is None else slack
        vals = self.phi(grid)
        scale = np.maximum(np.abs(vals), 1e-300)
        mono = int(np.sum(np.diff(vals) < -slack * scale[1:]))
        # concavity along the (possibly nonuniform) grid: slopes must not increase
        slopes = np.diff(vals) / np.diff(grid)
        conc = int(np.sum(np.diff(slopes) > slack * np.abs(slopes[1:]) + 1e-300))
        ratio = grid / vals
        ratio_viol = int(np.sum(np.diff(ratio) <= 0))
        zero = 0 if self.phi(0.0) == 0.0 else 1
        return {"monotone": mono, "concave": conc, "ratio_increasing": ratio_viol, "phi0": zero}


def laplace_exponent(B: FragmentationMeasure) -> LaplaceExponentTable:
    return _cached(B, "laplace", lambda: _build_laplace(B))


def _build_laplace(B):
    tol = B.quad_tol
    phi_inf = sum(c.first_moment(tol) for c in B.components) + B.dust_rate
    kappa = sum(c.kappa(tol) for c in B.components)
    return LaplaceExponentTable(B, phi_inf, kappa, B.declared_beta, tol, B.dust_rate)


# --------------------------------------------------------------------------
# inverse maps
# --------------------------------------------------------------------------

def _grow_bracket(f, x0, decreasing=False, step=math.log(2.0)):
    """Bracket a sign change of ``f`` on the log scale starting at ``x0``."""
    sign = -1.0 if decreasing else 1.0
    lo = hi = x0
    guard = math.log(_BRACKET_GUARD)
    while sign * f(hi) < 0:
        hi += step
        if hi > guard:
            raise DomainError("root bracket exceeded overflow guard")
    while sign * f(lo) > 0:
        lo -= step
        if lo < -guard:
            raise DomainError("root bracket exceeded underflow guard")
    return lo, hi


def _monotone_inverse(f, target, root_tol):
    g = lambda lt: f(math.exp(lt)) - target
    lo, hi = _grow_bracket(g, 0.0)
    if g(lo) == 0:
        return math.exp(lo)
    return math.exp(optimize.brentq(g, lo, hi, xtol=root_tol, rtol=4 * np.finfo(float).eps, maxiter=400))


@dataclass(frozen=True, eq=False)
class RateFunctions:
    """``varphi`` (inverse of ``t/phi(t)``), ``h`` (inverse of ``t**(1+|a|/g)/phi(t)``) and ``phi**-1``."""

    table: LaplaceExponentTable
    gamma: Optional[float] = None
    root_tol: float = 1e-14
    bracket: str = "geometric doubling from 1, guard 1e300"

    def _vec(self, fn, s):
        arr = np.asarray(s, dtype=float)
        out = np.array([fn(float(v)) for v in arr.ravel()]).reshape(arr.shape)
        return float(out) if np.ndim(s) == 0 else out

    def varphi(self, s):
        def one(v):
            if not v > self.table.ratio_infimum:
                raise DomainError(f"varphi({v}) undefined: t/phi(t) > {self.table.ratio_infimum}")
            if math.isinf(v):
                return math.inf
            return _monotone_inverse(lambda t: t / self.table.phi(t), v, self.root_tol)
        return self._vec(one, s)

    def h(self, s):
        if self.gamma is None or not self.gamma > 0:
            raise DomainError("h needs gamma > 0")
        p = 1.0 + self.table.measure.abs_alpha / self.gamma

        def one(v):
            if not v > 0:
                raise DomainError("h is defined on ]0, inf[")
            # work with logs: t**p/phi(t) spans many decades
            return _monotone_inverse(lambda t: p * math.log(t) - math.log(self.table.phi(t)), math.log(v),
                                     self.root_tol)
        return self._vec(one, s)

    def phi_inverse(self, s):
        lo = self.table.dust_rate

        def one(v):
            if not lo < v < self.table.phi_inf:
                raise DomainError(f"phi^-1({v}) undefined outside ]{lo}, {self.table.phi_inf}[")
            return _monotone_inverse(self.table.phi, v, self.root_tol)
        return self._vec(one, s)


def rate_functions(tab: LaplaceExponentTable, gamma=None, root_tol=1e-14) -> RateFunctions:
    return RateFunctions(tab, gamma, root_tol)


# --------------------------------------------------------------------------
# regular variation
# --------------------------------------------------------------------------

@dataclass
class RegularVariationReport:
    estimate: float
    declared: Optional[float]
    grid: list
    residual: float
    conclusive: bool
    agrees: Optional[bool]
    tolerance: float

    def to_dict(self):
        return dict(self.__dict__)


def check_hypothesis_H(tab: LaplaceExponentTable, grid: Sequence[float] = None, tolerance=0.05):
    """Least-squares log-log slope of ``phi`` at infinity compared to the declared index."""
    grid = np.geomspace(1e2, 1e6, 21) if grid is None else np.asarray(grid, dtype=float)
    if grid.size < 2:
        return RegularVariationReport(float("nan"), tab.beta, list(grid), float("nan"), False, None, tolerance)
    lx, ly = np.log(grid), np.log(tab.phi(grid))
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = float(np.max(np.abs(ly - (slope * lx + intercept))))
    # a local-slope drift larger than the tolerance means the grid is not yet in the regular regime
    local = np.diff(ly) / np.diff(lx)
    conclusive = bool(np.ptp(local) < tolerance)
    agrees = None if tab.beta is None else bool(abs(slope - tab.beta) <= tolerance)
    return RegularVariationReport(float(slope), tab.beta, grid.tolist(), resid, conclusive, agrees, tolerance)
