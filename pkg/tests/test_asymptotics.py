import math

import numpy as np
import pytest
from scipy import stats

from conftest import TIGHT
from weakmoments.asymptotics import (
    berry_esseen_bound,
    cgf_third_derivative,
    clt_run,
    clt_sup_error,
    distributional_clt_ks,
    normalized_sum_cf,
    normalized_sum_log_cf,
    sample_weighted,
    standardised_sums,
    weighted_density,
)
from weakmoments.distributions import Atom, Cauchy, Gaussian, Mixture, StudentT
from weakmoments.errors import NotADensity, NonPositiveVariance, ParameterOutOfDomain
from weakmoments.weakcore import WeakPair, normalise, symmetric_grid, weak_cf, weak_cumulants

CAUCHY = normalise(WeakPair(Cauchy(), quad=TIGHT))
GAUSS = normalise(WeakPair(Gaussian(), quad=TIGHT))


def test_transform_at_origin_is_one():
    assert normalized_sum_cf(CAUCHY, 50, 0.0) == pytest.approx(1.0, abs=1e-14)


def test_single_term_is_the_rescaled_base():
    k2 = weak_cumulants(CAUCHY, 2).kappa(2)
    for t in (0.4, 1.3):
        assert normalized_sum_cf(CAUCHY, 1, t) == pytest.approx(weak_cf(CAUCHY, t / math.sqrt(k2)), abs=1e-12)


def test_large_n_is_close_to_gaussian():
    assert abs(normalized_sum_cf(CAUCHY, 10_000, 1.0) - math.exp(-0.5)) < 0.01


def test_sup_error_decreases():
    errs = [clt_sup_error(CAUCHY, n, 3.0, 61) for n in (10, 100, 1000, 10_000)]
    assert all(b < 1.1 * a for a, b in zip(errs, errs[1:]))
    assert errs[2] < 0.02


def test_asymmetric_base_has_square_root_rate():
    run = clt_run(normalise(WeakPair(Cauchy(1.0, 1.0), quad=TIGHT)), [100, 1000, 10_000, 100_000], 3.0, 61)
    assert -0.65 <= run.fitted_slope <= -0.35


def test_symmetric_base_has_faster_rate():
    # kappa_3 vanishes for a symmetric pair, so the leading error term is O(1/n)
    run = clt_run(CAUCHY, [100, 1000, 10_000, 100_000], 3.0, 61)
    assert run.fitted_slope == pytest.approx(-1.0, abs=0.05)


def test_third_derivative_of_even_cgf_vanishes_at_zero():
    k3 = cgf_third_derivative(CAUCHY, [0.0, 1.0, 2.0])
    assert abs(k3[0]) < 1e-6
    assert abs(k3[1]) > 1e-3


def test_log_error_bound_holds_on_grid():
    be = berry_esseen_bound(CAUCHY, 3.0)
    t = symmetric_grid(3.0, 121)
    for n in (100, 1000, 10_000):
        logz = normalized_sum_log_cf(CAUCHY, n, t)
        assert np.all(np.abs(logz + t * t / 2) <= be.bound(n))


def test_gaussian_base_is_within_bound():
    be = berry_esseen_bound(GAUSS, 3.0)
    t = symmetric_grid(3.0, 121)
    assert clt_sup_error(GAUSS, 100, 3.0, 121) < be.bound(100)
    logz = normalized_sum_log_cf(GAUSS, 1000, t)
    err = np.max(np.abs(logz + t * t / 2))
    assert err * 10 <= be.bound(1000)


def test_weighted_density_of_cauchy_pair():
    h = weighted_density(WeakPair(Cauchy(), quad=TIGHT))
    assert h.Z == pytest.approx(math.exp(0.5) * math.erfc(1 / math.sqrt(2)), abs=1e-12)
    k = weak_cumulants(WeakPair(Cauchy(), quad=TIGHT), 2)
    assert h.mean == pytest.approx(k.kappa(1), abs=1e-7)
    assert h.var == pytest.approx(k.kappa(2), abs=1e-7)
    assert h.var == pytest.approx(0.5258, abs=2e-3)


def test_weighted_density_of_gaussian_pair():
    h = weighted_density(WeakPair(Gaussian()))
    x = np.linspace(-4, 4, 33)
    assert np.allclose(h.pdf(x), stats.norm.pdf(x, scale=math.sqrt(0.5)), rtol=1e-12)
    assert h.var == pytest.approx(0.5, abs=1e-10)


def test_weighted_density_cf_equals_weak_cf():
    p = WeakPair(Cauchy(0.3, 1.0))
    h = weighted_density(p)
    for t in np.linspace(-3, 3, 13):
        assert abs(h.cf(t) - weak_cf(p, t) / h.Z) < 1e-7


def test_weighted_density_guards():
    with pytest.raises(NotADensity):
        weighted_density(WeakPair(Atom(0.0)))
    with pytest.raises(NotADensity):
        weighted_density(WeakPair(Mixture(((1.0, Cauchy()), (-0.5, Gaussian())))))
    with pytest.raises(NonPositiveVariance):
        clt_sup_error(normalise(WeakPair(Atom(0.5))), 10)


@pytest.fixture(scope="module")
def cauchy_h():
    return weighted_density(WeakPair(Cauchy(), quad=TIGHT))


def test_sampler_mean(cauchy_h):
    s = sample_weighted(cauchy_h, 100_000, seed=7)
    assert abs(s.values.mean() - cauchy_h.mean) < 4 * cauchy_h.sd / math.sqrt(1e5)
    assert 0 < s.acceptance_rate <= 1


def test_sampler_goodness_of_fit(cauchy_h):
    x = sample_weighted(cauchy_h, 100_000, seed=11).values
    edges = cauchy_h.mean + cauchy_h.sd * np.linspace(-3.5, 3.5, 39)
    grid = np.linspace(-40, 40, 800_001)
    cdf = np.concatenate([[0.0], np.cumsum((cauchy_h.pdf(grid[1:]) + cauchy_h.pdf(grid[:-1])) / 2 * np.diff(grid))])
    F = np.interp(edges, grid, cdf)
    probs = np.diff(np.concatenate([[0.0], F, [cdf[-1]]]))
    counts = np.histogram(x, np.concatenate([[-np.inf], edges, [np.inf]]))[0]
    assert stats.chisquare(counts, probs / probs.sum() * len(x)).pvalue > 1e-3


def test_sampler_empirical_cf(cauchy_h):
    x = sample_weighted(cauchy_h, 100_000, seed=13).values
    assert abs(np.mean(np.exp(1j * x)) - cauchy_h.cf(1.0)) < 0.01


def test_sampling_does_not_depend_on_thread_count(cauchy_h):
    a = sample_weighted(cauchy_h, 150_000, seed=3, workers=1).values
    b = sample_weighted(cauchy_h, 150_000, seed=3, workers=3).values
    assert np.array_equal(a, b)
    z1 = standardised_sums(cauchy_h, 20, 60_000, seed=3, workers=1)
    z2 = standardised_sums(cauchy_h, 20, 60_000, seed=3, workers=2)
    assert np.array_equal(z1, z2)


def test_ks_for_gaussian_weighted_density_is_at_noise_level():
    h = weighted_density(WeakPair(Gaussian()))
    reps = 20_000
    for n in (2, 10):
        assert distributional_clt_ks(h, n, reps, seed=5) < 1.63 / math.sqrt(reps)


def test_ks_small_n_student_t():
    h = weighted_density(WeakPair(StudentT(3.0)))
    assert distributional_clt_ks(h, 50, 20_000, seed=5) < 0.02


def test_ks_guards(cauchy_h):
    with pytest.raises(ParameterOutOfDomain):
        distributional_clt_ks(cauchy_h, 1, 5000, seed=1)
    with pytest.raises(ParameterOutOfDomain):
        distributional_clt_ks(cauchy_h, 10, 10, seed=1)
