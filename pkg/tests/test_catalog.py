"""Moment formulas, limit measures and the exact laws of the examples."""
import math

import numpy as np
import pytest

from fragkin.catalog import (catalog, example_measure, factorization_check, limit_measure, moments_of_I,
                             moments_of_R, quasi_stationary, tail_asymptotics_mu_inf)
from fragkin.errors import InapplicableBranchError, ParameterRangeError, PreconditionError
from fragkin.measure import laplace_exponent


@pytest.mark.parametrize("ex", [1, 2, 3, 4, 5])
@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_exact_laws_carry_formula_moments(ex, n):
    e = catalog(ex)
    assert e.law_I.moment(n) == pytest.approx(moments_of_I(e.tab, e.B.alpha, n), rel=1e-8)
    assert e.law_R.moment(n) == pytest.approx(moments_of_R(e.tab, e.B.alpha, n), rel=1e-8)


def test_moment_edge_cases():
    tab = laplace_exponent(example_measure(1))
    assert moments_of_I(tab, -1.0, 0) == 1.0
    assert moments_of_R(tab, -1.0, 0) == 1.0
    with pytest.raises(ValueError):
        moments_of_I(tab, -1.0, -1)
    # Example 1 with b = 2: I ~ Gamma(3)
    assert moments_of_I(tab, -1.0, 2) == pytest.approx(12.0)


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0, 4.0])
def test_mass_closed_forms(t):
    assert catalog(1).m1_values(t) == pytest.approx(math.exp(-t) * (1 + t + t * t / 2), rel=1e-12)
    assert catalog(3).m1_values(t) == pytest.approx(math.exp(-t * t), rel=1e-12)
    assert catalog(2).m1_values(t) == pytest.approx(math.erfc(t / 2), rel=1e-8)


def test_printed_variant_has_no_closed_forms():
    e = catalog(2, variant="printed")
    assert e.law_I is None and e.m1 is None
    assert e.lim.law_R is None


@pytest.mark.parametrize("ex", [1, 2, 3, 4])
@pytest.mark.parametrize("n", [0, 1, 2])
def test_limit_density_moments(ex, n):
    lim = catalog(ex).lim
    assert lim.normalization(n) == pytest.approx(lim.moments(n), rel=1e-6)


def test_limit_measure_support():
    assert catalog(1).lim.support_sup == pytest.approx(1.0)
    assert math.isinf(catalog(3).lim.support_sup)
    with pytest.raises(ParameterRangeError):
        limit_measure(laplace_exponent(example_measure(1)), 0.5)


@pytest.mark.parametrize("ex", [1, 2, 3, 4, 5])
def test_factorization_into_exponential(ex):
    e = catalog(ex)
    rep = factorization_check(e.law_I, e.lim, 50_000, np.random.default_rng(ex))
    assert rep.passed, rep.z_scores
    assert rep.ks_pvalue > 1e-3


def test_factorization_needs_samplers():
    e = catalog(2, variant="printed")
    with pytest.raises(PreconditionError):
        factorization_check(e.law_I, e.lim, 10, np.random.default_rng(0))


def test_quasi_stationary_initial():
    e = catalog(1)
    qs = quasi_stationary(e.lim, 2.0)
    assert qs.first_moment == pytest.approx(1.0)
    assert qs.survival(1.0) == pytest.approx(math.exp(-0.5))
    x = qs.tail.sample(np.random.default_rng(0), 1000)
    assert np.all(x <= 2.0 + 1e-12)
    with pytest.raises(ParameterRangeError):
        quasi_stationary(e.lim, -1.0)


def test_tail_branches():
    e1 = catalog(1)
    rep = tail_asymptotics_mu_inf(e1.lim, e1.tab, e1.B.alpha)
    assert rep.branch == "bounded" and rep.support_sup == pytest.approx(1.0)
    e5 = catalog(5)
    rep5 = tail_asymptotics_mu_inf(e5.lim, e5.tab, e5.B.alpha)
    assert rep5.atom_present and rep5.atom_mass == pytest.approx(e5.lim.law_R.atom_at_one)
    e3 = catalog(3)
    rep3 = tail_asymptotics_mu_inf(e3.lim, e3.tab, e3.B.alpha, grid=[4.0, 8.0, 16.0])
    assert rep3.branch == "infinity"
    # ratio of -log P(R > s) to its first-order rate tends to one
    assert abs(rep3.ratios[-1] - 1) < abs(rep3.ratios[0] - 1) + 1e-12
    assert rep3.ratios[-1] == pytest.approx(1.0, abs=0.15)


def test_tail_branch_inapplicable():
    from fragkin.measure import FragmentationMeasure, density_from_expression
    B = FragmentationMeasure((density_from_expression("(1-u)**-1.5"),), -1.0)
    tab = laplace_exponent(B)
    with pytest.raises(InapplicableBranchError):
        tail_asymptotics_mu_inf(limit_measure(tab, -1.0), tab, -1.0)
