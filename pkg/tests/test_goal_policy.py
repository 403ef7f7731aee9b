import math

import numpy as np
import pytest
from scipy import stats

from goalspace.errors import DimensionError
from goalspace.goal_policy import (
    GoalPolicy,
    KdeModel,
    kde_density,
    kde_fit,
    sample_goal,
    scott_factor,
)


def brute_density(samples, H, q):
    """Direct mixture sum, written independently of the package."""
    d = samples.shape[1]
    Hinv = np.linalg.inv(H)
    norm = (2 * math.pi) ** (-d / 2) / math.sqrt(np.linalg.det(H))
    total = 0.0
    for s in samples:
        diff = q - s
        total += norm * math.exp(-0.5 * diff @ Hinv @ diff)
    return total / len(samples)


def test_scott_factor_value():
    assert scott_factor(10_000, 2) == pytest.approx(0.2154, abs=1e-4)


def test_bandwidth_is_scaled_covariance():
    x = np.random.default_rng(0).standard_normal((300, 3))
    m = kde_fit(x)
    assert np.allclose(m.bandwidth, np.cov(x, rowvar=False) * 300 ** (-1 / 7))
    sq = kde_fit(x, scott_squared=True)
    assert np.allclose(sq.bandwidth, np.cov(x, rowvar=False) * 300 ** (-2 / 7))
    assert np.allclose(m.cholesky @ m.cholesky.T, m.bandwidth)
    assert np.array_equal(m.bandwidth, m.bandwidth.T)
    assert np.all(np.linalg.eigvalsh(m.bandwidth) > 0)


def test_standard_normal_bandwidth():
    n = 5000
    m = kde_fit(np.random.default_rng(1).standard_normal((n, 2)))
    expected = n ** (-1 / 6) * np.eye(2)
    assert np.all(np.abs(m.bandwidth - expected) < 0.1 * n ** (-1 / 6))


def test_degenerate_data_regularized():
    m = kde_fit(np.tile([0.3, -0.2], (50, 1)))
    assert m.regularized
    assert np.allclose(m.bandwidth, 1e-9 * np.eye(2))
    goals = GoalPolicy("kde", 2, m).sample(np.random.default_rng(0), 100)
    assert np.abs(goals - [0.3, -0.2]).max() < 1e-3


def test_empty_outcomes_raise():
    with pytest.raises(DimensionError):
        kde_fit(np.empty((0, 2)))


def test_kernel_peak_value():
    m = KdeModel(np.zeros((1, 2)), np.eye(2), np.eye(2))
    assert kde_density(m, np.zeros(2)) == pytest.approx(1 / (2 * math.pi), rel=1e-15)


def test_density_matches_brute_force():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((40, 3)) @ rng.standard_normal((3, 3))
    m = kde_fit(x)
    for q in rng.standard_normal((20, 3)):
        assert kde_density(m, q) == pytest.approx(brute_density(x, m.bandwidth, q), rel=1e-12)


def test_density_integrates_to_one():
    rng = np.random.default_rng(3)
    m = kde_fit(rng.standard_normal((30, 2)))
    lo, hi = m.samples.min(axis=0) - 3, m.samples.max(axis=0) + 3
    pts = rng.uniform(lo, hi, (10 ** 6, 2))
    vol = np.prod(hi - lo)
    est = vol * np.mean(kde_density(m, pts))
    assert est == pytest.approx(1.0, abs=0.03)


def test_far_tail():
    m = KdeModel(np.zeros((3, 2)), np.eye(2) * 0.01, np.eye(2) * 0.1)
    assert kde_density(m, np.array([10.0, 0.0])) < 1e-30


def test_single_component_concentration():
    H = 1e-6 * np.eye(2)
    m = KdeModel(np.array([[3.0, 3.0]]), H, np.linalg.cholesky(H))
    g = GoalPolicy("kde", 2, m).sample(np.random.default_rng(0), 1000)
    assert np.all(np.abs(g - 3.0) < 3 * 1e-3 + 1e-3)


def test_kde_sample_moments():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((10_000, 2)) @ np.array([[1.0, 0.0], [0.6, 0.5]])
    pol = GoalPolicy.from_outcomes(x)
    g = pol.sample(rng, 100_000)
    assert np.abs(g.mean(axis=0) - x.mean(axis=0)).max() < 0.05
    n, d = x.shape
    expected = np.cov(x, rowvar=False) * (1 + n ** (-1 / (d + 4)))
    got = np.cov(g, rowvar=False)
    assert np.all(np.abs(got - expected) <= 0.1 * np.abs(expected).max())
    assert np.abs(np.diag(got) / np.diag(expected) - 1).max() < 0.1


def test_kde_samples_follow_mixture_ks():
    centres = np.array([[-2.0, 0.0], [0.5, 1.0], [3.0, -1.0]])
    H = np.array([[0.3, 0.1], [0.1, 0.2]])
    m = KdeModel(centres, H, np.linalg.cholesky(H))
    g = GoalPolicy("kde", 2, m).sample(np.random.default_rng(5), 10_000)
    for j in range(2):
        sd = math.sqrt(H[j, j])

        def cdf(t, j=j, sd=sd):
            return np.mean([stats.norm.cdf(t, c, sd) for c in centres[:, j]], axis=0)
        assert stats.kstest(g[:, j], cdf).pvalue > 0.01


def test_gaussian_prior_moments():
    g = sample_goal(GoalPolicy.gaussian_prior(2), np.random.default_rng(0))
    assert g.shape == (2,)
    draws = GoalPolicy.gaussian_prior(2).sample(np.random.default_rng(6), 100_000)
    assert np.abs(draws.mean(axis=0)).max() < 0.02
    assert np.abs(np.cov(draws, rowvar=False) - np.eye(2)).max() < 0.05


def test_uniform_policy_box():
    draws = GoalPolicy.uniform(3).sample(np.random.default_rng(7), 1000)
    assert draws.min() >= 0 and draws.max() < 1


def test_policy_validation():
    with pytest.raises(ValueError):
        GoalPolicy("kde", 2)
    with pytest.raises(ValueError):
        GoalPolicy("lp", 2)
    with pytest.raises(DimensionError):
        GoalPolicy("kde", 3, kde_fit(np.random.default_rng(0).random((10, 2))))
