"""The acceptance suite: ten gated checks, each runnable at desk scale.

Every check returns a :class:`CriterionResult`; :func:`run_all` runs them in
order.  Sample sizes, tolerances and the seed are fixed in advance.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .catalog import catalog, example_measure, factorization_check, moments_of_I
from .initial import InitialMeasure
from .laws import MittagLeffler
from .measure import laplace_exponent, levy_image, rate_functions
from .paths import PURPOSE_INDEPENDENT, RngPolicy, key_identity_check, sample_functional, simulate_batch
from .solution import (SimParams, estimate_solution, mass_curve, verify_atom_mass,
                       verify_quasi_stationary_evolution, verify_rescaled_convergence)

SEED = 7


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        return f"criterion {self.number:2d} [{'PASS' if self.passed else 'FAIL'}] {self.title} ({self.seconds:.1f}s)"

    def to_dict(self):
        return dict(self.__dict__)


def _z(est, target, se):
    return (est - target) / se if se > 0 else (0.0 if est == target else math.inf)


def _rng(k, seed):
    return RngPolicy(seed).generator(1000 + k, PURPOSE_INDEPENDENT)


def criterion_1(seed=SEED, n_rep=100_000):
    """Example 1 mass curve against ``exp(-t)(1 + t + t**2/2)``."""
    grid = [0.5, 1.0, 2.0]
    c = mass_curve(example_measure(1, b=2.0, alpha=-1.0), InitialMeasure.dirac(), grid, SimParams(n_rep=n_rep, seed=seed))
    exact = [math.exp(-t) * (1 + t + t * t / 2) for t in grid]
    z = [_z(m, e, s) for m, e, s in zip(c.mass, exact, c.se)]
    return all(abs(v) <= 3 for v in z), {"t": grid, "mass": c.mass, "se": c.se, "exact": exact, "z": z}


def criterion_2(seed=SEED, n_rep=100_000):
    """Example 3 (gamma = 1/2): ``m(1) = e**-1`` and ``m(2) = e**-4``."""
    grid = [1.0, 2.0]
    c = mass_curve(example_measure(3, gamma=0.5, alpha=-1.0), InitialMeasure.dirac(), grid,
                   SimParams(n_rep=n_rep, seed=seed))
    exact = [math.exp(-t * t) for t in grid]
    z = [_z(m, e, s) for m, e, s in zip(c.mass, exact, c.se)]
    return all(abs(v) <= 3 for v in z), {"t": grid, "mass": c.mass, "se": c.se, "exact": exact, "z": z}


def criterion_3(seed=SEED, n_rep=100_000):
    """Path-simulated ``E[I**n]`` against ``n!/prod phi(i|alpha|)``, Examples 1 and 5."""
    out, ok = {}, True
    for ex in (1, 5):
        B = example_measure(ex)
        I = sample_functional(levy_image(B), B.alpha, n_rep, seed=seed)
        tab = laplace_exponent(B)
        rows = []
        for n in (1, 2, 3):
            v = I ** n
            est, se = float(v.mean()), float(v.std(ddof=1) / math.sqrt(n_rep))
            target = moments_of_I(tab, B.alpha, n)
            z = _z(est, target, se)
            ok &= abs(z) <= 4
            rows.append({"n": n, "empirical": est, "se": se, "formula": target, "z": z})
        out[f"example{ex}"] = rows
    return ok, out


def criterion_4(seed=SEED, n_rep=100_000):
    """``R I`` is standard exponential: moments 1..4, Examples 1, 2 and 4, exact laws."""
    out, ok = {}, True
    for k, ex in enumerate((1, 2, 4)):
        e = catalog(ex)
        rep = factorization_check(e.law_I, e.lim, n_rep, _rng(40 + k, seed), orders=(1, 2, 3, 4), threshold=4.0)
        ok &= rep.passed
        out[f"example{ex}"] = rep.to_dict()
    return ok, out


def criterion_5(seed=SEED, n_rep=100_000):
    """``(I - t)^+`` against ``X(t)**|alpha| I'`` at ``t = 1``, Example 1."""
    B = example_measure(1)
    rep = key_identity_check(levy_image(B), B.alpha, 1.0, n_rep, seed=seed, orders=(1, 2), threshold=4.0)
    return rep.passed, rep.to_dict()


def criterion_6(seed=SEED, n_rep=100_000):
    """Quasi-stationary start, Example 2, ``lambda = 1``."""
    rep = verify_quasi_stationary_evolution(example_measure(2), 1.0, [0.5, 1.0, 2.0], SimParams(n_rep=n_rep, seed=seed),
                                            orders=(1, 2, 3), survival_threshold=3.0, moment_threshold=4.0)
    return rep.passed, rep.to_dict()


def criterion_7(seed=SEED, n_rep=100_000):
    """Example 5 atom ``e**-t`` at ``t = 1, 2``; Example 1 ratio decreasing over ``t = 5, 10, 20``."""
    sim = SimParams(n_rep=n_rep, seed=seed)
    d = InitialMeasure.dirac()
    a5 = verify_atom_mass(example_measure(5), d, [1.0, 2.0], sim, threshold=3.0)
    a1 = verify_atom_mass(example_measure(1), d, [5.0, 10.0, 20.0], sim, method="population")
    r = a1.ratio
    decreasing = all(b < a for a, b in zip(r, r[1:]))
    return bool(a5.passed and decreasing and a1.ratio_branch == "no-atom"), {
        "example5": a5.to_dict(), "example1": a1.to_dict(), "ratio_decreasing": decreasing}


def criterion_8(seed=SEED, n_rep=100_000):
    """Example 2 rescaled first moment of ``X(t)**|alpha|`` against ``phi(|alpha|)``."""
    rep = verify_rescaled_convergence(example_measure(2), InitialMeasure.dirac(), [8.0, 16.0, 32.0],
                                      SimParams(n_rep=n_rep, seed=seed), orders=(1,), threshold=4.0)
    return rep.passed, rep.to_dict()


def _phi_invariants():
    out = {}
    for ex in (1, 2, 3, 4, 5):
        out[f"example{ex}"] = laplace_exponent(example_measure(ex)).check_grid()
    out["example2_printed"] = laplace_exponent(example_measure(2, variant="printed")).check_grid()
    return out


def _varphi_round_trips(tol=1e-10):
    worst = {}
    for ex in (1, 2, 3, 4, 5):
        tab = laplace_exponent(example_measure(ex))
        rf = rate_functions(tab)
        lo = tab.ratio_infimum
        vs = (lo if lo > 0 else 1e-3) * np.geomspace(1.001, 1e4, 40)
        err = max(abs(s / tab.phi(s) - v) / v for v, s in ((v, rf.varphi(v)) for v in vs))
        worst[f"example{ex}"] = float(err)
    return worst, sum(v > tol for v in worst.values())


def _coupled_monotone(seed):
    grid = np.linspace(0.05, 4.0, 80)
    viol = {}
    for ex in (1, 2, 3, 4, 5):
        B = example_measure(ex)
        c = mass_curve(B, InitialMeasure.dirac(), grid, SimParams(n_rep=5000, seed=seed))
        res = simulate_batch(levy_image(B), B.alpha, grid, 2000, seed=seed)
        path_viol = int(np.sum(res.alive[:, 1:] & ~res.alive[:, :-1]))
        viol[f"example{ex}"] = int(np.sum(np.diff(c.mass) > 0)) + path_viol
    return viol


def _support(seed):
    viol = {}
    mu = InitialMeasure([(0.5, 1.0), (1.0, 0.5)])
    for ex in (1, 2, 3, 4, 5):
        B = example_measure(ex)
        for name, m0 in (("dirac", InitialMeasure.dirac()), ("two_atoms", mu)):
            s = estimate_solution(B, m0, 1.5, SimParams(n_rep=5000, seed=seed))
            viol[f"example{ex}_{name}"] = int(np.sum(s.conditional_sample > m0.support_sup))
    return viol


def _normalizations():
    out = {}
    for ex in (1, 2, 3, 4):
        e = catalog(ex)
        out[f"example{ex}_u_inf"] = float(abs(e.lim.normalization(0) - 1.0))
        lo, hi = e.law_I.support
        out[f"example{ex}_law_I"] = float(abs(integrate.quad(lambda x: float(e.law_I.pdf(x)), lo, hi,
                                                             epsabs=1e-12, epsrel=1e-12, limit=500)[0] - 1.0))
    return out


def criterion_9(seed=SEED):
    """Invariant suites: phi shape, varphi round trips, coupled monotonicity, support, normalizations."""
    phi = _phi_invariants()
    phi_viol = sum(sum(v.values()) for v in phi.values())
    rt, rt_viol = _varphi_round_trips()
    mono = _coupled_monotone(seed)
    sup = _support(seed)
    norm = _normalizations()
    norm_viol = sum(v > 1e-6 for v in norm.values())
    total = phi_viol + rt_viol + sum(mono.values()) + sum(sup.values()) + norm_viol
    return total == 0, {"phi_grid": phi, "varphi_round_trip": rt, "coupled_mass_violations": mono,
                        "support_violations": sup, "normalization_errors": norm, "violations": total}


def criterion_10(seed=SEED, n_rep=100_000):
    """Mittag-Leffler moments by quadrature; Example 5 density normalization and tail."""
    ml = MittagLeffler(0.5)
    ml_rows, ok = [], True
    for n in (1, 2, 3, 4):
        val = integrate.quad(lambda x: x ** n * float(ml.pdf(x)), 0, np.inf, epsabs=0, epsrel=1e-12, limit=500)[0]
        target = math.factorial(n) / math.gamma(0.5 * n + 1)
        rel = abs(val - target) / target
        ok &= rel <= 1e-5
        ml_rows.append({"n": n, "quadrature": val, "exact": target, "rel_error": rel})
    e5 = catalog(5, a=0.5)
    mass = integrate.quad(lambda x: float(e5.law_I.pdf(x)), 0, np.inf, epsabs=1e-13, epsrel=1e-13, limit=500)[0]
    ok &= abs(mass - 1.0) <= 1e-6
    B = e5.B
    I = sample_functional(levy_image(B), B.alpha, n_rep, seed=seed)
    tail = []
    for t in (0.5, 1.0, 2.0):
        p = float(np.mean(I > t))
        se = math.sqrt(p * (1 - p) / n_rep)
        exact = float(e5.law_I.sf(t))
        z = _z(p, exact, se)
        ok &= abs(z) <= 3
        tail.append({"t": t, "mc": p, "se": se, "series": exact, "z": z})
    return ok, {"mittag_leffler": ml_rows, "example5_density_integral": mass, "example5_tail": tail}


CRITERIA = {
    1: ("exact mass curve, Example 1", criterion_1),
    2: ("exact mass curve, Example 3", criterion_2),
    3: ("moments of I, Examples 1 and 5", criterion_3),
    4: ("factorization R I = Exp(1)", criterion_4),
    5: ("(I - t)^+ identity, Example 1", criterion_5),
    6: ("quasi-stationary evolution, Example 2", criterion_6),
    7: ("atom mass and no-atom ratio trend", criterion_7),
    8: ("rescaled convergence, Example 2", criterion_8),
    9: ("invariant suites", criterion_9),
    10: ("series oracles", criterion_10),
}


def run_criterion(k, seed=SEED) -> CriterionResult:
    title, fn = CRITERIA[k]
    t0 = time.perf_counter()
    passed, details = fn(seed=seed)
    return CriterionResult(k, title, bool(passed), details, time.perf_counter() - t0)


def run_all(seed=SEED, only=None):
    return [run_criterion(k, seed) for k in (only or CRITERIA)]
