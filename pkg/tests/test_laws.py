"""Exact laws: Mittag-Leffler, stable, series and lattice distributions."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from fragkin.errors import ParameterRangeError
from fragkin.laws import (ExpPower, GammaLaw, LatticeLaw, MittagLeffler, SeriesDensity, SizeBiasedMittagLeffler,
                          StablePower, mittag_leffler_density, mittag_leffler_sf, sample_mittag_leffler,
                          sample_size_biased_mittag_leffler, sample_stable)


@pytest.mark.parametrize("x", [0.0, 0.3, 1.0, 2.5, 6.0, 15.0])
def test_half_order_mittag_leffler_is_half_normal(x):
    # M_{1/2} has the law of |N(0, 2)|
    assert mittag_leffler_density(0.5, x) == pytest.approx(math.exp(-x * x / 4) / math.sqrt(math.pi), rel=1e-8)
    assert mittag_leffler_sf(0.5, x) == pytest.approx(special.erfc(x / 2), rel=1e-8, abs=1e-300)


@pytest.mark.parametrize("g", [0.2, 0.5, 0.8])
@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_mittag_leffler_moments_by_quadrature(g, n):
    law = MittagLeffler(g)
    val = integrate.quad(lambda x: x ** n * float(law.pdf(x)), 0, np.inf, limit=500, epsrel=1e-11)[0]
    assert val == pytest.approx(math.factorial(n) / math.gamma(1 + n * g), rel=1e-6)
    assert law.moment(n) == pytest.approx(math.factorial(n) / math.gamma(1 + n * g), rel=1e-12)


@pytest.mark.parametrize("g", [0.3, 0.7])
def test_mittag_leffler_sf_matches_integrated_density(g):
    law = MittagLeffler(g)
    for x in (0.2, 1.0, 2.0):
        tail = integrate.quad(lambda y: float(law.pdf(y)), x, np.inf, limit=500, epsrel=1e-11)[0]
        assert float(law.sf(x)) == pytest.approx(tail, rel=1e-6)


@pytest.mark.parametrize("g", [0.3, 0.5, 0.8])
def test_stable_laplace_transform(g):
    rng = np.random.default_rng(11)
    tau = sample_stable(rng, g, 200_000)
    for lam in (0.5, 1.0, 2.0):
        v = np.exp(-lam * tau)
        assert abs(v.mean() - math.exp(-lam ** g)) < 4 * v.std() / math.sqrt(v.size)


@pytest.mark.parametrize("g", [0.25, 0.5, 0.75])
def test_mittag_leffler_sampler_moments(g):
    m = sample_mittag_leffler(np.random.default_rng(3), g, 200_000)
    for n in (1, 2):
        v = m ** n
        target = math.factorial(n) / math.gamma(1 + n * g)
        assert abs(v.mean() - target) < 4 * v.std() / math.sqrt(v.size)


@pytest.mark.parametrize("g", [0.3, 0.6])
def test_size_biased_sampler_and_sf(g):
    law = SizeBiasedMittagLeffler(g)
    x = sample_size_biased_mittag_leffler(np.random.default_rng(5), g, 200_000)
    assert abs(x.mean() - law.moment(1)) < 4 * x.std() / math.sqrt(x.size)
    for q in (0.5, 1.5):
        p = np.mean(x > q)
        assert abs(p - float(law.sf(q))) < 4 * math.sqrt(p * (1 - p) / x.size)
    total = integrate.quad(lambda y: float(law.pdf(y)), 0, np.inf, limit=500)[0]
    assert total == pytest.approx(1.0, abs=1e-7)


def test_stable_power_moments():
    law = StablePower(0.5, -0.5)
    # tau**-1/2 = M**1 exactly for g = 1/2
    for n in (1, 2, 3):
        assert law.moment(n) == pytest.approx(MittagLeffler(0.5).moment(n), rel=1e-12)
    with pytest.raises(ParameterRangeError):
        StablePower(0.5, 1.0)


@pytest.mark.parametrize("q", [1.5, 2.0, 4.0])
def test_series_density_integrates_to_one(q):
    law = SeriesDensity(q)
    assert integrate.quad(lambda x: float(law.pdf(x)), 0, np.inf, limit=500, epsabs=1e-13)[0] == pytest.approx(1, abs=1e-8)
    m1 = integrate.quad(lambda x: x * float(law.pdf(x)), 0, np.inf, limit=500)[0]
    assert m1 == pytest.approx(law.moment(1), rel=1e-7)


def test_series_density_against_hypoexponential_sample():
    q = 2.0
    rng = np.random.default_rng(8)
    # independent exponentials with rates q**j, j >= 0
    s = sum(rng.exponential(q ** -j, 400_000) for j in range(60))
    law = SeriesDensity(q)
    for x in (0.5, 1.0, 2.0, 3.0):
        p = np.mean(s > x)
        assert abs(p - float(law.sf(x))) < 4 * math.sqrt(p * (1 - p) / s.size)


def test_lattice_law_moments_and_atom():
    r = 0.5
    law = LatticeLaw(r)
    for n in (1, 2, 3):
        assert law.moment(n) == pytest.approx(np.prod([1 - r ** i for i in range(1, n + 1)]), rel=1e-10)
    # P(N = 0) = (r; r)_inf
    assert law.atom_at_one == pytest.approx(np.prod([1 - r ** i for i in range(1, 200)]), rel=1e-12)


@pytest.mark.parametrize("bad", [lambda: LatticeLaw(1.0), lambda: SeriesDensity(1.0), lambda: MittagLeffler(1.0)])
def test_law_parameter_checks(bad):
    with pytest.raises(ParameterRangeError):
        bad()


def test_exp_power_and_gamma_moments():
    assert ExpPower(0.5).moment(2) == pytest.approx(math.gamma(2.0))
    assert GammaLaw(3.0).moment(2) == pytest.approx(12.0)
    rng = np.random.default_rng(0)
    x = ExpPower(0.5, 2.0).sample(rng, 100_000)
    assert abs(np.mean(x > 1.0) - float(ExpPower(0.5, 2.0).sf(1.0))) < 0.01


@settings(max_examples=25, deadline=None)
@given(g=st.floats(0.05, 0.95), x=st.floats(0.01, 8.0))
def test_mittag_leffler_sf_in_unit_interval_and_decreasing(g, x):
    a, b = float(mittag_leffler_sf(g, x)), float(mittag_leffler_sf(g, 1.1 * x))
    assert 0.0 <= b <= a <= 1.0
    assert mittag_leffler_density(g, x) >= 0
