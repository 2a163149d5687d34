"""Subordinator paths, the Lamperti time change and the batch engine."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fragkin.catalog import catalog, example_measure, moments_of_I
from fragkin.errors import InvalidTruncationError
from fragkin.measure import laplace_exponent, levy_image
from fragkin.paths import (RngPolicy, default_eps, draw_process, exponential_functional, integral_to,
                           key_identity_check, sample_functional, sample_path, simulate_batch, thin_path,
                           time_change)


def test_rng_policy_streams_are_distinct_and_reproducible():
    p = RngPolicy(5)
    a = p.generator(0).random(4)
    assert np.array_equal(a, RngPolicy(5).generator(0).random(4))
    assert not np.array_equal(a, p.generator(1).random(4))
    assert not np.array_equal(a, p.generator(0, 3).random(4))


def test_default_eps():
    assert default_eps(levy_image(example_measure(1))) == 0.0
    assert default_eps(levy_image(example_measure(3))) > 0.0


def test_path_value_and_segments():
    B = example_measure(5)
    path = sample_path(levy_image(B), 20.0, rng=np.random.default_rng(0))
    # Example 5: every jump has size ln 2
    assert np.allclose(path.jump_sizes, math.log(2))
    assert path.value(0.0) == 0.0
    k = len(path.jump_times)
    assert path.value(path.horizon) == pytest.approx(k * math.log(2))
    total = sum(b - a for a, b, _ in path.segments())
    assert total == pytest.approx(path.horizon)


def test_time_change_inverts_integral():
    B = example_measure(3)
    path = sample_path(levy_image(B), 5.0, rng=np.random.default_rng(1))
    A = integral_to(path, B.alpha, 2.0)
    assert time_change(path, B.alpha, A) == pytest.approx(2.0, rel=1e-9)
    assert time_change(path, B.alpha, 0.0) == 0.0


def test_thin_path_keeps_large_jumps():
    B = example_measure(3)
    L = levy_image(B)
    path = sample_path(L, 3.0, eps=1e-3, rng=np.random.default_rng(2), compensate=False)
    thin = thin_path(path, 0.05)
    assert np.all(thin.jump_sizes > 0.05)
    assert np.array_equal(thin.jump_sizes, path.jump_sizes[path.jump_sizes > 0.05])
    # coarser truncation is dominated pathwise
    u = np.linspace(0, 3, 7)
    assert np.all(thin.value(u) <= path.value(u) + 1e-12)
    with pytest.raises(InvalidTruncationError):
        thin_path(path, 1e-5)


@pytest.mark.parametrize("ex, n", [(1, 3000), (3, 200), (5, 3000)])
def test_exponential_functional_mean(ex, n):
    B = example_measure(ex)
    L = levy_image(B)
    rng = np.random.default_rng(ex)
    draws = np.array([exponential_functional(L, B.alpha, rng=rng)[0] for _ in range(n)])
    target = moments_of_I(laplace_exponent(B), B.alpha, 1)
    assert abs(draws.mean() - target) < 4 * draws.std() / math.sqrt(draws.size)


def test_draw_process_consistency():
    B = example_measure(1)
    rng = np.random.default_rng(4)
    for _ in range(50):
        d = draw_process(levy_image(B), B.alpha, 1.0, 0.7, rng=rng)
        assert d.alive == (d.extinction_time > 0.7)
        assert 0 <= d.value <= 1.0
    with pytest.raises(ValueError):
        draw_process(levy_image(B), B.alpha, -1.0, 1.0)


def test_batch_is_deterministic_and_thread_invariant():
    B = example_measure(3)
    L = levy_image(B)
    q = np.array([0.2, 0.5, 1.0])
    a = simulate_batch(L, B.alpha, q, 3000, seed=9, block_size=512)
    b = simulate_batch(L, B.alpha, q, 3000, seed=9, block_size=512, threads=4)
    assert np.array_equal(a.alive, b.alive)
    np.testing.assert_array_equal(a.xi, b.xi)
    c = simulate_batch(L, B.alpha, q, 3000, seed=10, block_size=512)
    assert not np.array_equal(a.xi, c.xi, equal_nan=True)


def test_batch_input_validation():
    L = levy_image(example_measure(1))
    with pytest.raises(ValueError):
        simulate_batch(L, -1.0, np.array([1.0, 0.5]), 10)
    with pytest.raises(ValueError):
        simulate_batch(L, -1.0, np.array([1.0]))
    with pytest.raises(ValueError):
        simulate_batch(L, -1.0, np.array([-1.0]), 10)


@pytest.mark.parametrize("t", [0.5, 1.0, 3.0])
def test_example1_survival(t):
    B = example_measure(1)
    r = simulate_batch(levy_image(B), B.alpha, np.array([t]), 40_000, seed=2)
    p = r.alive[:, 0].mean()
    exact = math.exp(-t) * (1 + t + t * t / 2)
    assert abs(p - exact) < 4 * math.sqrt(exact * (1 - exact) / 40_000)


def test_monotone_in_time():
    B = example_measure(4)
    r = simulate_batch(levy_image(B), B.alpha, np.linspace(0.1, 3, 15), 4000, seed=3)
    assert not np.any(r.alive[:, 1:] & ~r.alive[:, :-1])
    x = r.masses()
    assert np.all(np.diff(np.where(r.alive, x, 0.0), axis=1) <= 1e-15)


@pytest.mark.parametrize("ex, t, lam", [(2, 4.0, 0.5), (2, 4.0, 2.0), (1, 6.0, 1.0)])
def test_tilted_estimator_is_unbiased(ex, t, lam):
    e = catalog(ex)
    r = simulate_batch(levy_image(e.B), e.B.alpha, np.array([t]), 40_000, seed=1, tilt=lam)
    v = r.alive[:, 0] * np.exp(r.logw[:, 0])
    exact = e.m1_values(t)
    assert abs(v.mean() - exact) < 4 * v.std() / math.sqrt(v.size)


def test_tilt_reduces_variance_for_rare_survival():
    e = catalog(2)
    L = levy_image(e.B)
    plain = simulate_batch(L, e.B.alpha, np.array([4.0]), 20_000, seed=4)
    tilted = simulate_batch(L, e.B.alpha, np.array([4.0]), 20_000, seed=4, tilt=1.0)
    v = tilted.alive[:, 0] * np.exp(tilted.logw[:, 0])
    assert v.std() < 0.2 * plain.alive[:, 0].std()


def test_identity_check_example3():
    B = example_measure(3)
    rep = key_identity_check(levy_image(B), B.alpha, 0.5, 20_000, seed=1)
    assert rep.passed, rep.z_scores


def test_functional_nonnegative_and_finite():
    B = example_measure(2)
    I = sample_functional(levy_image(B), B.alpha, 2000, seed=0)
    assert np.all(I > 0) and np.all(np.isfinite(I))


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 31), x0=st.floats(0.2, 3.0))
def test_extinction_scales_with_initial_size(seed, x0):
    B = example_measure(1)
    L = levy_image(B)
    d1 = draw_process(L, B.alpha, 1.0, 0.0, rng=np.random.default_rng(seed))
    d2 = draw_process(L, B.alpha, x0, 0.0, rng=np.random.default_rng(seed))
    assert d2.extinction_time == pytest.approx(x0 ** -B.alpha * d1.extinction_time, rel=1e-12)
