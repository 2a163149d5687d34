"""Initial measures and size-biased sampling of the starting size."""
import math

import numpy as np
import pytest
from scipy import integrate

from fragkin.errors import ConfigError, UnsupportedTailError
from fragkin.initial import GenericDensityTail, InitialMeasure, PowerTail, StretchedExpTail, sample_initial


def test_dirac_is_normalised():
    mu = InitialMeasure.dirac(2.0)
    assert mu.first_moment == 1.0 and mu.is_dirac() and mu.support_sup == 2.0
    x, tag = sample_initial(mu, np.random.default_rng(0), 5)
    assert np.all(x == 2.0) and np.all(tag == 0)


def test_unnormalised_rejected():
    with pytest.raises(ConfigError):
        InitialMeasure([(1.0, 2.0)])
    with pytest.raises(ConfigError):
        InitialMeasure([(-1.0, 1.0)])


def test_atom_mixture_sampling_frequencies():
    mu = InitialMeasure([(0.5, 1.0), (1.0, 0.5)])
    x, tag = sample_initial(mu, np.random.default_rng(1), 100_000)
    # size-biased shares are 0.5 and 0.5
    assert abs(np.mean(x == 0.5) - 0.5) < 0.01
    assert set(np.unique(tag)) == {0, 1}


def test_normalized_rescales_everything():
    mu = InitialMeasure.normalized([(2.0, 1.0)], PowerTail(1.0, 5.0))
    assert mu.first_moment == pytest.approx(1.0)
    assert mu.tail.weight == pytest.approx((1 / 3) / (2 + 1 / 3))


@pytest.mark.parametrize("C, g", [(1.0, 1.0), (2.0, 0.5), (0.5, 2.0)])
def test_stretched_exp_tail(C, g):
    tail = StretchedExpTail(C, g)
    mass = integrate.quad(lambda x: x * float(tail.u0(x)), 0, np.inf)[0]
    assert mass == pytest.approx(1.0, rel=1e-8)
    x = tail.sample(np.random.default_rng(2), 100_000)
    assert abs(x.mean() - tail.sb_moment(1)) < 4 * x.std() / math.sqrt(x.size)


@pytest.mark.parametrize("g", [3.0, 4.5, 6.0])
def test_power_tail(g):
    tail = PowerTail(1.0, g, 1.0)
    assert tail.weight == pytest.approx(integrate.quad(lambda x: x * float(tail.u0(x)), 1, np.inf)[0], rel=1e-8)
    assert tail.infinite_variance == (g <= 4)
    x = tail.sample(np.random.default_rng(3), 200_000)
    assert x.min() >= 1.0
    assert abs(np.mean(x > 2.0) - 2.0 ** (2 - g)) < 0.005
    assert math.isinf(tail.sb_moment(g - 2))


def test_tail_parameter_checks():
    with pytest.raises(ConfigError):
        PowerTail(1.0, 2.0)
    with pytest.raises(ConfigError):
        StretchedExpTail(-1.0, 1.0)


def test_generic_density_tail():
    tail = GenericDensityTail(lambda x: np.ones_like(np.asarray(x, dtype=float)), (0.0, 1.0))
    assert tail.weight == pytest.approx(0.5)
    x = tail.sample(np.random.default_rng(4), 100_000)
    # size-biased law of the uniform is 2x dx
    assert abs(x.mean() - 2 / 3) < 0.005
    with pytest.raises(UnsupportedTailError), np.errstate(all="ignore"):
        GenericDensityTail(lambda x: 1.0 / np.asarray(x) ** 2, (0.0, 1.0))


def test_spec_round_trip():
    mu = InitialMeasure.from_spec({"atoms": [[1.0, 0.5]], "tail": {"kind": "power", "C": 1.0, "gamma": 4.0},
                                   "normalize": True})
    nu = InitialMeasure.from_spec(mu.to_spec())
    assert nu.first_moment == pytest.approx(1.0)
    assert nu.tail.C == pytest.approx(mu.tail.C)
    assert InitialMeasure.from_spec(None).is_dirac()
    with pytest.raises(ConfigError):
        InitialMeasure.from_spec({"tail": {"kind": "weird"}})
