"""Laplace exponent, Lévy image and rate functions."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fragkin.catalog import example_measure
from fragkin.errors import FragkinError, InvalidMeasureError, ParameterRangeError
from fragkin.measure import (Dirac, Example1Density, FragmentationMeasure, check_hypothesis_H,
                             density_from_expression, laplace_exponent, levy_image, rate_functions)

# values frozen from independent mpmath quadrature of int (1 - x**t) x B(dx)
ORACLES = [
    ((2, {"variant": "printed"}), "phi", 1.0, 0.564189583547756),
    ((2, {"variant": "printed"}), "phi", 0.5, 0.322037341905002),
    ((2, {"variant": "printed"}), "kappa", None, 0.782132838274834),
    ((2, {"variant": "printed", "alpha": -1.0}), "kappa", None, 0.391066419137417),
    ((3, {}), "phi", 1.0, 1.128379167095513),
    ((3, {}), "phi", 2.0, 1.772453850905516),
    ((3, {}), "kappa", None, 1.772453850905516),
    ((4, {}), "phi", 0.5, 1.128379167095513),
    ((4, {}), "phi", 1.0, 1.772453850905516),
    ((4, {}), "kappa", None, 3.544907701811032),
]


@pytest.mark.parametrize("example, what, t, expected", ORACLES)
def test_closed_forms_match_quadrature_oracles(example, what, t, expected):
    tab = laplace_exponent(example_measure(example[0], **example[1]))
    got = tab.phi(t) if what == "phi" else tab.kappa
    assert got == pytest.approx(expected, rel=1e-9)


@pytest.mark.parametrize("t", [0.1, 0.5, 1.0, 3.0, 20.0])
def test_example1_and_example5_elementary_phi(t):
    assert laplace_exponent(example_measure(1, b=2.0)).phi(t) == pytest.approx(t / (t + 2), rel=1e-12)
    assert laplace_exponent(example_measure(5, a=0.5)).phi(t) == pytest.approx(1 - 2.0 ** -t, rel=1e-12)


def test_example2_dust_adds_killing_rate():
    printed = laplace_exponent(example_measure(2, variant="printed"))
    dust = laplace_exponent(example_measure(2))
    assert dust.dust_rate == pytest.approx(1 / math.sqrt(math.pi), rel=1e-14)
    # phi(1/2) = Gamma(3/2) for the Mittag-Leffler variant
    assert dust.phi(0.5) == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-10)
    assert dust.phi(1.3) - printed.phi(1.3) == pytest.approx(dust.dust_rate, rel=1e-10)
    assert dust.ratio_infimum == 0.0


def test_scalars_of_bounded_examples():
    t1 = laplace_exponent(example_measure(1))
    assert (t1.kappa, t1.phi_inf) == (pytest.approx(0.5), pytest.approx(1.0))
    t5 = laplace_exponent(example_measure(5))
    assert t5.kappa == pytest.approx(math.log(2))
    assert t5.ratio_infimum == pytest.approx(1 / math.log(2))


@pytest.mark.parametrize("t", [0.3, 1.0, 7.5])
def test_generic_density_by_quadrature(t):
    # B(du) = du on ]0,1[: phi(t) = 1/2 - 1/(t+2)
    B = FragmentationMeasure((density_from_expression("1 + 0*u"),), -1.0)
    assert laplace_exponent(B).phi(t) == pytest.approx(0.5 - 1 / (t + 2), rel=1e-8)


def test_phi_at_zero_is_zero():
    for ex in (1, 2, 3, 4, 5):
        assert laplace_exponent(example_measure(ex, variant="printed") if ex == 2
                                else example_measure(ex)).phi(0.0) == 0.0


@pytest.mark.parametrize("builder", [
    lambda: FragmentationMeasure((Example1Density(2.0),), 0.5),
    lambda: FragmentationMeasure((), -1.0),
    lambda: FragmentationMeasure((Example1Density(2.0),), -1.0, dust_rate=-1.0),
    lambda: density_from_expression("__import__('os')"),
    lambda: density_from_expression("-1 + 0*u"),
])
def test_invalid_measures_raise(builder):
    with pytest.raises(InvalidMeasureError):
        builder()


@pytest.mark.parametrize("ex, kw", [(2, {"gamma": 1.5}), (4, {"alpha": -2.0}), (5, {"a": 1.0}), (7, {})])
def test_example_parameter_ranges(ex, kw):
    with pytest.raises(ParameterRangeError):
        example_measure(ex, **kw)


def test_error_hierarchy():
    assert issubclass(InvalidMeasureError, FragkinError)
    assert issubclass(InvalidMeasureError, ValueError)


@pytest.mark.parametrize("ex", [1, 2, 3, 4, 5])
def test_spec_round_trip(ex):
    B = example_measure(ex)
    C = FragmentationMeasure.from_spec(B.to_spec())
    assert C.to_spec() == B.to_spec()
    s = np.array([0.2, 1.0, 4.0])
    np.testing.assert_allclose(laplace_exponent(C).phi(s), laplace_exponent(B).phi(s), rtol=1e-13)


def test_mixture_and_lattice_detection():
    B = FragmentationMeasure((Dirac(0.5), Dirac(0.25)), -1.0)
    assert B.is_lattice
    C = FragmentationMeasure((Dirac(0.5), Dirac(0.3)), -1.0)
    assert not C.is_lattice
    assert not example_measure(1).is_lattice
    spec = B.to_spec()
    assert spec["family"] == "mixture"
    assert FragmentationMeasure.from_spec(spec).is_lattice


def test_scaled_measure_scales_phi():
    B = example_measure(3)
    s = np.array([0.5, 2.0])
    np.testing.assert_allclose(laplace_exponent(B.scaled(3.0)).phi(s), 3 * laplace_exponent(B).phi(s), rtol=1e-10)


def test_levy_image_is_cached():
    B = example_measure(1)
    assert levy_image(B) is levy_image(B)
    assert laplace_exponent(B) is laplace_exponent(B)


@pytest.mark.parametrize("ex", [1, 2, 3, 4, 5])
def test_phi_grid_invariants(ex):
    viol = laplace_exponent(example_measure(ex)).check_grid()
    assert sum(viol.values()) == 0, viol


@pytest.mark.parametrize("ex", [3, 4])
def test_regular_variation_index(ex):
    rep = check_hypothesis_H(laplace_exponent(example_measure(ex)))
    assert rep.conclusive and rep.agrees
    assert rep.estimate == pytest.approx(0.5, abs=0.01)


@settings(max_examples=40, deadline=None)
@given(ex=st.sampled_from([1, 3, 4, 5]), s=st.floats(0.01, 200.0), r=st.floats(1.01, 5.0))
def test_phi_is_increasing_and_concave(ex, s, r):
    tab = laplace_exponent(example_measure(ex))
    a, b, c = tab.phi(s), tab.phi(r * s), tab.phi(r * r * s)
    assert a <= b * (1 + 1e-12)
    # concave and phi(0)=0: phi(t)/t is nonincreasing
    assert b / (r * s) <= a / s * (1 + 1e-9)
    assert c / (r * r * s) <= b / (r * s) * (1 + 1e-9)


@settings(max_examples=40, deadline=None)
@given(ex=st.sampled_from([1, 2, 3, 4, 5]), k=st.floats(1.001, 1e4))
def test_varphi_inverts_t_over_phi(ex, k):
    tab = laplace_exponent(example_measure(ex))
    lo = tab.ratio_infimum if tab.ratio_infimum > 0 else 1e-3
    v = lo * k
    s = rate_functions(tab).varphi(v)
    assert s / tab.phi(s) == pytest.approx(v, rel=1e-10)


def test_varphi_outside_domain():
    rf = rate_functions(laplace_exponent(example_measure(1)))
    with pytest.raises(FragkinError):
        rf.varphi(1.0)


@pytest.mark.parametrize("expr, infinite", [
    ("(1 - u)**2 / (u**2 * log(u)**2)", True),
    ("(1 - u)**2 * (-log(u))**-1.5 / u**2", True),
    ("u**-1.5", False),
])
def test_kappa_divergence_for_heavy_large_jumps(expr, infinite):
    tab = laplace_exponent(FragmentationMeasure((density_from_expression(expr),), -1.0))
    assert math.isinf(tab.kappa) == infinite
    if not infinite:
        # Pi(dy) = exp(-y/2) dy
        assert tab.kappa == pytest.approx(4.0, rel=1e-8)
