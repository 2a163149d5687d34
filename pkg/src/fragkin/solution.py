"""Monte Carlo solutions of the fragmentation equation and checks of their asymptotics.

``int f(x) x mu_t(dx) = E[f(X(t))]`` where ``X(0)`` is drawn from
``x mu_0(dx)`` and ``X`` is the self-similar process of :mod:`fragkin.paths`.
The mass ``m(t)`` is the survival probability ``P(X(t) > 0)``.

Two estimators are provided.  :func:`estimate_solution` and
:func:`mass_curve` are plain Monte Carlo over independent replicates.  For
times where ``m(t)`` is far below ``1/n_rep``, :func:`population_estimate`
runs a guided resampling particle system: particles are advanced stage by
stage under a tilted law that favours survival, reweighted and resampled,
and ``m(t)`` is the product of the stage normalisers.  Restarting a particle
of mass ``x`` is exact by self-similarity, ``X`` started at ``x`` being
``x X'(x**alpha t)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .catalog import limit_measure, moments_of_R
from .errors import ConfigError, LatticeMeasureError, PreconditionError, UnsupportedTailError
from .initial import InitialMeasure, PowerTail, StretchedExpTail, sample_initial
from .measure import FragmentationMeasure, laplace_exponent, levy_image, rate_functions
from .paths import PURPOSE_INITIAL, PURPOSE_RESAMPLE, RngPolicy, simulate_batch

_STAGE_STREAM = 1 << 20


@dataclass
class SimParams:
    """Simulation controls; ``eps=None`` picks the default truncation."""

    eps: Optional[float] = None
    tail_tol: float = 1e-12
    window_cap: int = 64
    n_rep: int = 100_000
    seed: int = 0
    threads: int = 1
    compensate: bool = True
    max_steps: int = 10 ** 7

    @classmethod
    def from_dict(cls, d):
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown simulation fields: {sorted(unknown)}")
        return cls(**known)

    def to_dict(self):
        return asdict(self)


def _batch(B, alpha, queries, sim: SimParams, *, n=None, functional=False, tilt=0.0, stream_offset=0):
    return simulate_batch(levy_image(B), alpha, queries, n, seed=sim.seed, eps=sim.eps,
                          compensate=sim.compensate, tilt=tilt, functional=functional, tail_tol=sim.tail_tol,
                          max_steps=sim.max_steps, threads=sim.threads, stream_offset=stream_offset)


def _initial_draws(mu0: InitialMeasure, sim: SimParams, n):
    rng = RngPolicy(sim.seed).generator(0, PURPOSE_INITIAL)
    return sample_initial(mu0, rng, n)


def rescale_factor(B: FragmentationMeasure, t):
    """``(varphi(|alpha| t) / (|alpha| t))**(1/|alpha|)``, or ``nan`` outside the domain of varphi."""
    tab = laplace_exponent(B)
    a = B.abs_alpha
    s = a * t
    if not s > tab.ratio_infimum:
        return math.nan
    return (rate_functions(tab).varphi(s) / s) ** (1.0 / a)


@dataclass
class EmpiricalSolution:
    """Estimate of ``m(t)`` and of the size-biased law ``x mu_t(dx) / m(t)``."""

    t: float
    n_rep: int
    mass_estimate: float
    mass_se: float
    conditional_sample: np.ndarray = field(repr=False)
    rescale_factor: float
    moments: list
    moment_ses: list
    atom_estimate: Optional[float] = None
    atom_se: Optional[float] = None
    eps: float = 0.0
    values: np.ndarray = field(default=None, repr=False)

    def summary(self):
        d = {k: v for k, v in self.__dict__.items() if k not in ("conditional_sample", "values")}
        d["n_alive"] = int(self.conditional_sample.size)
        return d


def _moment_table(values, factor, power, orders=(1, 2, 3, 4)):
    if values.size == 0 or not np.isfinite(factor):
        return [math.nan] * len(orders), [math.nan] * len(orders)
    y = (factor * values) ** power
    ms, ses = [], []
    for k in orders:
        v = y ** k
        ms.append(float(v.mean()))
        ses.append(float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan)
    return ms, ses


def estimate_solution(B: FragmentationMeasure, mu0: InitialMeasure, t, sim: SimParams) -> EmpiricalSolution:
    """Plain Monte Carlo: ``n_rep`` independent ``(X(0), path)`` pairs resolved at ``t``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    n = sim.n_rep
    x0, tag = _initial_draws(mu0, sim, n)
    res = _batch(B, B.alpha, (x0 ** B.alpha * t)[:, None], sim)
    alive = res.alive[:, 0]
    X = res.masses(x0)[:, 0]
    m = alive.mean()
    se = math.sqrt(m * (1 - m) / n)
    cond = X[alive]
    fac = rescale_factor(B, t) if t > 0 else math.nan
    mom, mse = _moment_table(cond, fac, B.abs_alpha)
    atom = atom_se = None
    if mu0.atom_mass(1.0) > 0:
        hit = alive & res.nojump[:, 0] & (tag >= 0) & (x0 == 1.0)
        atom = float(hit.mean())
        atom_se = math.sqrt(atom * (1 - atom) / n)
    return EmpiricalSolution(float(t), n, float(m), se, cond, fac, mom, mse, atom, atom_se, res.eps, X)


@dataclass
class MassCurve:
    t: list
    mass: list
    se: list
    n_rep: int

    def rows(self):
        return list(zip(self.t, self.mass, self.se))


def extinction_times(B: FragmentationMeasure, mu0: InitialMeasure, sim: SimParams):
    """``X(0)**|alpha| I`` per replicate (plus the initial draws)."""
    n = sim.n_rep
    x0, _ = _initial_draws(mu0, sim, n)
    res = _batch(B, B.alpha, np.empty((n, 0)), sim, functional=True)
    return x0 ** B.abs_alpha * res.functional, x0


def mass_curve(B: FragmentationMeasure, mu0: InitialMeasure, t_grid: Sequence[float], sim: SimParams) -> MassCurve:
    """``m(t)`` on a grid with common random numbers: one extinction time per replicate."""
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) < 0):
        raise ValueError("t_grid must be increasing")
    T, _ = extinction_times(B, mu0, sim)
    n = T.size
    m = np.array([(T > t).mean() for t in t_grid])
    se = np.sqrt(m * (1 - m) / n)
    return MassCurve(t_grid.tolist(), m.tolist(), se.tolist(), n)


# --------------------------------------------------------------------------
# resampling particle system
# --------------------------------------------------------------------------

class SurvivalGuide:
    """Approximate ``log P(x**|alpha| I > s)`` used to steer the particle system.

    ``log h(x, s) = -((1-beta)/|alpha|) varphi(|alpha| s x**alpha)``, the
    large-deviation rate of the exponential functional, tabulated on a log
    grid of ``s x**alpha``.  Any positive guide gives unbiased estimates; a
    good one keeps the weights balanced.
    """

    def __init__(self, B: FragmentationMeasure, nodes=400, u_max=None):
        tab = laplace_exponent(B)
        rf = rate_functions(tab)
        a = B.abs_alpha
        beta = tab.beta if tab.beta is not None else 0.0
        self.alpha = B.alpha
        lo = max(tab.ratio_infimum, 1e-8) / a
        self._c = (1.0 - beta) / a
        u0 = math.log(lo) + 1e-9
        u1 = math.log(lo) + 60.0 if u_max is None else u_max
        self._u = np.linspace(u0, u1, nodes)
        self._lv = np.log([rf.varphi(a * math.exp(u)) for u in self._u])
        self._slope = (self._lv[-1] - self._lv[-2]) / (self._u[-1] - self._u[-2])
        self._dlv = np.gradient(self._lv, self._u)
        self._a = a

    def _interp(self, x, s):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            u = np.log(s) + self.alpha * np.log(x)
        lv = np.interp(u, self._u, self._lv, left=-np.inf)
        dlv = np.interp(u, self._u, self._dlv, left=0.0)
        hi = u > self._u[-1]
        lv[hi] = self._lv[-1] + self._slope * (u[hi] - self._u[-1])
        return lv, dlv

    def tilt(self, x, s):
        """Local Esscher parameter ``x d/dx log h(x, s)`` of the guided dynamics."""
        if s <= 0:
            return np.zeros(np.shape(x))
        lv, dlv = self._interp(x, s)
        out = np.zeros(lv.shape)
        ok = np.isfinite(lv)
        out[ok] = self._c * self._a * np.exp(lv[ok]) * dlv[ok]
        return out

    def log_h(self, x, s):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        if s <= 0:
            return out
        lv, _ = self._interp(x, s)
        ok = np.isfinite(lv)
        out[ok] = -self._c * np.exp(lv[ok])
        out[x <= 0] = -np.inf
        return out


@dataclass
class PopulationEstimate:
    """Particle-system estimate at a single time ``t``.

    ``stats[name]`` is ``(mean, se)`` of a statistic under the law of
    ``X(t)`` given survival; standard errors come from independent populations.
    """

    t: float
    mass: float
    mass_se: float
    log_mass: float
    stats: dict
    n_particles: int
    n_populations: int
    n_stages: int
    min_ess: float

    def to_dict(self):
        return dict(self.__dict__)


def _systematic(w, rng, size):
    c = np.cumsum(w)
    c /= c[-1]
    pos = (rng.uniform() + np.arange(size)) / size
    return np.minimum(np.searchsorted(c, pos), len(w) - 1)


_END_REFINE = 10
_TILT_LEVELS = 2  # buckets per doubling of the tilt parameter


def _advance(B, x, dt, sim, stage, lam):
    """One stage for every particle; tilted particles are grouped by quantized tilt."""
    n = x.size
    alive = np.zeros(n, dtype=bool)
    out = np.zeros(n)
    nj = np.zeros(n, dtype=bool)
    lw = np.zeros(n)
    if lam is None:
        code = np.full(n, -(1 << 30))
    else:
        with np.errstate(divide="ignore"):
            code = np.where(lam > 1e-3, np.floor(_TILT_LEVELS * np.log2(np.maximum(lam, 1e-300))), -(1 << 30))
    for j, c in enumerate(np.unique(code)):
        sel = np.nonzero(code == c)[0]
        tilt = 0.0 if c == -(1 << 30) else 2.0 ** (c / _TILT_LEVELS)
        res = _batch(B, B.alpha, (x[sel] ** B.alpha * dt)[:, None], sim, tilt=tilt,
                     stream_offset=stage * _STAGE_STREAM + j * 4096)
        alive[sel] = res.alive[:, 0]
        out[sel] = res.masses(x[sel])[:, 0]
        nj[sel] = res.nojump[:, 0]
        lw[sel] = res.logw[:, 0]
    return alive, out, nj, lw


def population_estimate(B: FragmentationMeasure, mu0: InitialMeasure, t, sim: SimParams, statistics=None,
                        n_populations=20, n_stages=None, guide="rate") -> PopulationEstimate:
    """Twisted resampling estimate of ``m(t)`` and of conditional statistics given survival.

    Each stage advances every particle over ``dt`` (restart from its current
    mass by self-similarity), weights it by ``1{alive} h(x', t - t_k)/h(x, t -
    t_{k-1})`` and resamples systematically.  ``guide="rate"`` uses
    :class:`SurvivalGuide`; ``guide=None`` gives ``h = 1``, the plain
    Fleming-Viot scheme.  ``statistics`` maps names to ``f(x, nojump)``.
    """
    statistics = statistics or {}
    t = float(t)
    if not t > 0:
        raise ValueError("t must be positive")
    K = int(n_populations)
    N = sim.n_rep // K
    if N < 10 or K < 2:
        raise ValueError("need at least 2 populations of 10 particles")
    if guide == "rate":
        guide = SurvivalGuide(B)
    n_stages = n_stages or max(8, int(math.ceil(2 * t)))
    marks = np.linspace(0.0, t, n_stages + 1)
    # the hazard is largest just before t: halve the last stage repeatedly
    dt = marks[1]
    marks = np.concatenate([marks[:-1], t - dt * 0.5 ** np.arange(1, _END_REFINE + 1), [t]])
    n_stages = marks.size - 1
    log_h = (lambda x, s: np.zeros(np.shape(x))) if guide is None else guide.log_h
    x = _initial_draws(mu0, SimParams(**{**sim.to_dict(), "n_rep": K * N}), K * N)[0]
    nojump = np.ones(K * N, dtype=bool)
    rng = RngPolicy(sim.seed).generator(0, PURPOSE_RESAMPLE)
    lz = np.zeros(K)
    lh = log_h(x, t)
    # initial twist
    logw = lh.copy()
    min_ess = 1.0
    for k in range(1, n_stages + 2):
        wk = logw.reshape(K, N)
        c = wk.max(axis=1, keepdims=True)
        if np.any(~np.isfinite(c)):
            raise PreconditionError("a population lost all its weight; use more stages")
        e = np.exp(wk - c)
        lz += c[:, 0] + np.log(e.mean(axis=1))
        min_ess = min(min_ess, float(np.min(e.sum(1) ** 2 / (e ** 2).sum(1) / N)))
        if k == n_stages + 1:
            break
        idx = np.concatenate([p * N + _systematic(e[p], rng, N) for p in range(K)])
        x, nojump, lh = x[idx], nojump[idx], lh[idx]
        dt = marks[k] - marks[k - 1]
        alive, x, nj, lw = _advance(B, x, dt, sim, k, None if guide is None else guide.tilt(x, t - marks[k - 1]))
        nojump = nojump & nj
        new = np.where(alive, log_h(np.where(alive, x, 1.0), t - marks[k]), -np.inf)
        logw = new - lh + lw
        lh = new
    st = {}
    w = np.exp(logw.reshape(K, N) - logw.reshape(K, N).max(axis=1, keepdims=True))
    w /= w.sum(axis=1, keepdims=True)
    for name, f in statistics.items():
        vals = np.zeros(K * N)
        live = np.isfinite(logw)
        vals[live] = np.asarray(f(x[live], nojump[live]), dtype=float)
        per = (w * vals.reshape(K, N)).sum(axis=1)
        st[name] = (float(per.mean()), float(per.std(ddof=1) / math.sqrt(K)))
    c = lz.max()
    r = np.exp(lz - c)
    mass = math.exp(c) * r.mean()
    mass_se = math.exp(c) * r.std(ddof=1) / math.sqrt(K)
    return PopulationEstimate(t, float(mass), float(mass_se), float(c + math.log(r.mean())), st, K * N, K,
                              n_stages, min_ess)


# --------------------------------------------------------------------------
# verification reports
# --------------------------------------------------------------------------

@dataclass
class AsymptoticsReport:
    t: list
    mass: list
    ratio: list
    exponential_bound: dict
    notes: list
    passed: Optional[bool] = None

    def to_dict(self):
        return dict(self.__dict__)


def _require_bounded_unit(mu0):
    if not mu0.bounded or abs(mu0.support_sup - 1.0) > 1e-12:
        raise PreconditionError("this check needs mu_0 with bounded support and supremum 1")


def verify_mass_asymptotics(B: FragmentationMeasure, mu0: InitialMeasure, sim: SimParams, t_grid=None,
                            exact_mass: Callable = None, tolerance=0.15) -> AsymptoticsReport:
    """Ratio ``-ln m(t) / ((1-beta)/|alpha| varphi(|alpha| t))`` on a grid.

    ``m`` comes from ``exact_mass`` when supplied, otherwise from the
    resampling estimator.  ``passed`` reports whether the final ratio is
    within ``tolerance`` of one.
    """
    _require_bounded_unit(mu0)
    tab = laplace_exponent(B)
    if tab.beta is None:
        raise PreconditionError("hypothesis (H) must be declared: the measure has no regular-variation index")
    a = B.abs_alpha
    rf = rate_functions(tab)
    t_grid = [2.0, 4.0, 8.0] if t_grid is None else list(t_grid)
    if exact_mass is not None:
        logm = [float(np.log(exact_mass(t))) for t in t_grid]
    else:
        logm = [population_estimate(B, mu0, t, sim).log_mass for t in t_grid]
    ratio = [(-lm) / ((1 - tab.beta) / a * rf.varphi(a * t)) for lm, t in zip(logm, t_grid)]
    lam = 0.5 * tab.phi_inf if math.isfinite(tab.phi_inf) else 1.0
    bound = {"lambda": lam, "log_C_lambda": max(lm + lam * t for lm, t in zip(logm, t_grid))}
    notes = []
    if B.is_lattice:
        notes.append("lattice support: window statistics do not apply to this measure")
    return AsymptoticsReport(t_grid, [math.exp(v) for v in logm], ratio, bound, notes,
                             abs(ratio[-1] - 1) <= tolerance)


@dataclass
class ConvergenceReport:
    t: list
    rescale: list
    moments: dict
    targets: dict
    z_final: dict
    gaps: list
    mass: list
    passed: bool
    threshold: float
    method: str

    def to_dict(self):
        return dict(self.__dict__)


def verify_rescaled_convergence(B: FragmentationMeasure, mu0: InitialMeasure, t_grid, sim: SimParams,
                                orders=(1, 2), threshold=4.0, method="population",
                                n_populations=20) -> ConvergenceReport:
    """Moments of ``(c_t X(t))**(|alpha| n)`` given survival against ``prod_{i<=n} phi(i|alpha|)``.

    ``c_t = (varphi(|alpha| t)/(|alpha| t))**(1/|alpha|)``.  Passes when the
    first-order moment at the last time is within ``threshold`` standard
    errors of its target and the gap is nonincreasing over the last three
    grid times.
    """
    _require_bounded_unit(mu0)
    tab = laplace_exponent(B)
    if math.isinf(tab.kappa):
        raise PreconditionError("kappa must be finite")
    a = B.abs_alpha
    facs = [rescale_factor(B, t) for t in t_grid]
    if any(not np.isfinite(f) for f in facs):
        raise PreconditionError("grid times below the domain of varphi")
    fac_of = dict(zip([float(t) for t in t_grid], facs))
    targets = {n: moments_of_R(tab, B.alpha, n) for n in orders}
    moments = {n: [] for n in orders}
    mass = []
    if method == "population":
        for t in t_grid:
            f = fac_of[float(t)]
            stats_f = {n: (lambda x, nj, n=n: (f * x) ** (a * n)) for n in orders}
            est = population_estimate(B, mu0, t, sim, stats_f, n_populations=n_populations)
            for n in orders:
                moments[n].append(list(est.stats[n]))
            mass.append(est.mass)
    else:
        for t in t_grid:
            sol = estimate_solution(B, mu0, t, sim)
            for n in orders:
                moments[n].append([sol.moments[n - 1], sol.moment_ses[n - 1]])
            mass.append(sol.mass_estimate)
    z_final = {n: (moments[n][-1][0] - targets[n]) / moments[n][-1][1] for n in orders}
    first = orders[0]
    gaps = [abs(m[0] - targets[first]) for m in moments[first]]
    tail = gaps[-3:]
    monotone = all(b <= a_ for a_, b in zip(tail, tail[1:]))
    passed = bool(abs(z_final[first]) <= threshold and monotone)
    return ConvergenceReport(list(map(float, t_grid)), facs, moments, targets, z_final, gaps, mass, passed,
                             threshold, method)


@dataclass
class WindowReport:
    t: list
    values: list
    ses: list
    target: float
    rel_error_final: float
    passed: Optional[bool]

    def to_dict(self):
        return dict(self.__dict__)


def verify_window_statistics(B: FragmentationMeasure, mu0: InitialMeasure, g: Callable, t_grid, sim: SimParams,
                             tolerance=0.25, n_populations=20) -> WindowReport:
    """``g(t)**alpha / m(t) * int_0^{g(t) c_t^{-1}} x mu_t(dx)`` against ``1/(|alpha| kappa)``.

    The inner integral over ``m(t)`` is the fraction of survivors whose mass
    lies below the window ``g(t) (varphi(|alpha| t)/(|alpha| t))**(1/alpha)``.
    Convergence is slow: the window must hold many jumps of size ``kappa``.
    """
    _require_bounded_unit(mu0)
    tab = laplace_exponent(B)
    if math.isinf(tab.kappa):
        raise PreconditionError("kappa must be finite")
    if B.is_lattice:
        raise LatticeMeasureError("window statistics need a non-lattice measure")
    if B.dust_rate > 0:
        # mass lost directly to dust has no renewal structure at small sizes
        raise PreconditionError("window statistics need a measure without a dust rate")
    a = B.abs_alpha
    al = B.alpha
    vals, ses = [], []
    for t in t_grid:
        f, gt = rescale_factor(B, t), float(g(t))
        est = population_estimate(B, mu0, t, sim, {"w": lambda x, nj: (x * f <= gt) * gt ** al},
                                  n_populations=n_populations)
        vals.append(est.stats["w"][0])
        ses.append(est.stats["w"][1])
    vals, ses = np.array(vals), np.array(ses)
    target = 1.0 / (a * tab.kappa)
    rel = abs(vals[-1] - target) / target
    return WindowReport(list(map(float, t_grid)), vals.tolist(), ses.tolist(), target, float(rel),
                        bool(rel <= tolerance))


@dataclass
class AtomReport:
    t: list
    atom: list
    atom_se: list
    predicted: list
    z_scores: list
    ratio: list
    ratio_se: list
    ratio_branch: str
    predicted_ratio_limit: Optional[float]
    passed: bool

    def to_dict(self):
        return dict(self.__dict__)


def verify_atom_mass(B: FragmentationMeasure, mu0: InitialMeasure, t_grid, sim: SimParams, threshold=3.0,
                     method="direct", n_populations=20) -> AtomReport:
    """``mu_t({1}) = exp(-t phi(inf)) mu_0({1})`` and the trend of ``mu_t({1}) / m(t)``.

    ``method="direct"`` uses independent replicates (atom = survivors with no
    jump); ``method="population"`` uses the resampling estimator, needed at
    times where the ratio is conditioned on a rare survival event.
    """
    w = mu0.atom_mass(1.0)
    if not w > 0:
        raise PreconditionError("mu_0 needs an atom at 1")
    tab = laplace_exponent(B)
    if math.isinf(tab.phi_inf):
        raise PreconditionError("phi(inf) must be finite for the atom to survive")
    t_grid = [float(t) for t in t_grid]
    pred = [w * math.exp(-t * tab.phi_inf) for t in t_grid]
    crit = sum(c.near_one_mass(tab.quadrature_tol) for c in B.components)
    branch = "atom" if math.isfinite(crit) else "no-atom"
    lim_ratio = None
    if branch == "atom":
        lim = limit_measure(tab, B.alpha)
        lim_ratio = getattr(lim.law_R, "atom_at_one", None)
    if method == "direct":
        n = sim.n_rep
        x0, tag = _initial_draws(mu0, sim, n)
        res = _batch(B, B.alpha, x0[:, None] ** B.alpha * np.asarray(t_grid)[None, :], sim)
        at1 = (x0 == 1.0)[:, None] & res.alive & res.nojump
        atom = at1.mean(axis=0)
        atom_se = np.sqrt(atom * (1 - atom) / n)
        alive = res.alive.sum(axis=0)
        ratio = np.where(alive > 0, at1.sum(axis=0) / np.maximum(alive, 1), np.nan)
        ratio_se = np.sqrt(ratio * (1 - ratio) / np.maximum(alive, 1))
    else:
        ests = [population_estimate(B, mu0, t, sim, {"nojump": lambda x, nj: nj.astype(float)},
                                    n_populations=n_populations) for t in t_grid]
        r = np.array([e.stats["nojump"][0] for e in ests])
        rse = np.array([e.stats["nojump"][1] for e in ests])
        m, mse = np.array([e.mass for e in ests]), np.array([e.mass_se for e in ests])
        atom, atom_se = m * r, m * r * np.sqrt((mse / m) ** 2 + (rse / np.maximum(r, 1e-300)) ** 2)
        ratio, ratio_se = r, rse
    z = [(a_ - p) / s if s > 0 else (0.0 if a_ == p else math.inf) for a_, p, s in zip(atom, pred, atom_se)]
    passed = all(abs(v) <= threshold for v in z)
    return AtomReport(t_grid, list(map(float, atom)), list(map(float, atom_se)), pred, list(map(float, z)),
                      list(map(float, ratio)), list(map(float, ratio_se)), branch, lim_ratio, passed)


@dataclass
class UnboundedReport:
    tail_kind: str
    t: list
    mass: list
    mass_se: list
    predicted: list
    ratio: list
    constant: float
    notes: list

    def to_dict(self):
        return dict(self.__dict__)


def power_tail_constant(B: FragmentationMeasure, tail: PowerTail, sim: SimParams = None, exact_I_moment=None):
    """``C' = C int_0^inf m_1(u) u**((2-gamma)/alpha - 1) du / |alpha|``.

    With ``p = (gamma - 2)/|alpha|`` the integral equals ``E[I**p] / p``, so
    ``C' = C E[I**p] / (p |alpha|)``; ``E[I**p]`` is exact when supplied and
    otherwise estimated from the delta_1 extinction times.
    """
    a = B.abs_alpha
    p = (tail.gamma_tail - 2.0) / a
    if exact_I_moment is None:
        T, _ = extinction_times(B, InitialMeasure.dirac(), sim)
        e = float(np.mean(T ** p))
    else:
        e = float(exact_I_moment(p))
    return tail.C * e / (p * a)


def verify_unbounded_initial(B: FragmentationMeasure, mu0: InitialMeasure, t_grid, sim: SimParams,
                             exact_I_moment=None) -> UnboundedReport:
    """Mass decay from unbounded initial data (power tails exactly, stretched exponentials informally)."""
    tail = mu0.tail
    if not isinstance(tail, (PowerTail, StretchedExpTail)):
        raise UnsupportedTailError("needs a power or stretched-exponential tail")
    a = B.abs_alpha
    curve = mass_curve(B, mu0, t_grid, sim)
    notes = []
    if isinstance(tail, PowerTail):
        c = power_tail_constant(B, tail, sim, exact_I_moment)
        pred = [c * t ** ((tail.gamma_tail - 2.0) / B.alpha) for t in t_grid]
        ratio = [m / p for m, p in zip(curve.mass, pred)]
        return UnboundedReport("power", list(map(float, t_grid)), curve.mass, curve.se, pred, ratio, c, notes)
    tab = laplace_exponent(B)
    beta = tab.beta if tab.beta is not None else 0.0
    g = tail.gamma_tail
    rf = rate_functions(tab, gamma=g)
    e1 = 1.0 / (1.0 + (1.0 - beta) * g / a)
    cst = (1 + g * (1 - beta) / a) * (a ** (1.0 / (1 - beta)) / g) ** (g * (1 - beta) / (a + g * (1 - beta)))
    pred = [cst * tail.C ** e1 * rf.h(t) for t in t_grid]
    ratio = [(-math.log(m) / p) if m > 0 else math.nan for m, p in zip(curve.mass, pred)]
    notes.append("trajectory only: the regular-variation hypothesis on (ln m)' is not certified")
    return UnboundedReport("stretched_exp", list(map(float, t_grid)), curve.mass, curve.se, pred, ratio, cst * tail.C ** e1,
                           notes)


@dataclass
class QSReport:
    t: list
    lam: float
    survival: list
    survival_se: list
    predicted: list
    survival_z: list
    moments_initial: list
    moments: list
    moment_z: list
    passed: bool

    def to_dict(self):
        return dict(self.__dict__)


def verify_quasi_stationary_evolution(B: FragmentationMeasure, lam, t_grid, sim: SimParams, orders=(1, 2, 3),
                                      survival_threshold=3.0, moment_threshold=4.0) -> QSReport:
    """Start from ``lam R**(1/|alpha|)``; survival ``exp(-lam**alpha t)`` and a time-invariant conditional law.

    The conditional moments of ``X(t)**|alpha|`` at each ``t`` are compared with
    the exact initial moments ``lam**(|alpha| n) prod phi(i|alpha|)``.
    """
    from .catalog import quasi_stationary
    tab = laplace_exponent(B)
    lim = limit_measure(tab, B.alpha)
    mu0 = quasi_stationary(lim, lam)
    a = B.abs_alpha
    n = sim.n_rep
    x0, _ = _initial_draws(mu0, sim, n)
    t_grid = [float(t) for t in t_grid]
    res = _batch(B, B.alpha, x0[:, None] ** B.alpha * np.asarray(t_grid)[None, :], sim)
    X = res.masses(x0)
    pred = list(map(float, mu0.survival(t_grid)))
    surv, surv_se, surv_z, moms, mz = [], [], [], [], []
    init = [lim.scaled(lam).moments(k) for k in orders]
    ok = True
    for j, t in enumerate(t_grid):
        al = res.alive[:, j]
        m = al.mean()
        se = math.sqrt(m * (1 - m) / n) if 0 < m < 1 else 0.0
        z = (m - pred[j]) / se if se > 0 else 0.0
        surv.append(float(m))
        surv_se.append(se)
        surv_z.append(float(z))
        ok &= abs(z) <= survival_threshold
        y = X[al, j] ** a
        row, zrow = [], []
        for k, target in zip(orders, init):
            v = y ** k
            s = v.std(ddof=1) / math.sqrt(v.size)
            row.append(float(v.mean()))
            zrow.append(float((v.mean() - target) / s) if s > 0 else 0.0)
        ok &= all(abs(q) <= moment_threshold for q in zrow)
        moms.append(row)
        mz.append(zrow)
    return QSReport(t_grid, float(lam), surv, surv_se, pred, surv_z, init, moms, mz, bool(ok))


def report_json(report) -> str:
    """Deterministic JSON with floats printed at 17 significant digits."""
    obj = report if isinstance(report, dict) else report.to_dict()
    return _dump(obj, 0) + "\n"


def _dump(v, level):
    pad, inner = "  " * level, "  " * (level + 1)
    if isinstance(v, dict):
        if not v:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {_dump(v[k], level + 1)}" for k in sorted(v, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        if len(v) == 0:
            return "[]"
        if any(isinstance(x, (dict, list, tuple, np.ndarray)) for x in v):
            return "[\n" + ",\n".join(inner + _dump(x, level + 1) for x in v) + "\n" + pad + "]"
        return "[" + ", ".join(_dump(x, level + 1) for x in v) + "]"
    if v is None:
        return "null"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if not math.isfinite(f):
            return json.dumps(str(f))
        return format(f, ".17g")
    return json.dumps(str(v) if not isinstance(v, str) else v)
