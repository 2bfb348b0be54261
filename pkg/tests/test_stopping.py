"""Stopping-time sampling and empirical statistics."""

import numpy as np
import pytest

from etlearn import (
    DiscreteLinearModel,
    EmpiricalCdf,
    StoppingSample,
    empirical_cdf,
    empirical_mean,
    kappa_ks,
    ks_statistic,
    sample_stopping_times,
    sample_stopping_times_continuous,
)
from etlearn import ContinuousLinearModel


MODEL_08 = DiscreteLinearModel(np.array([[0.8]]), np.array([[1.0]]))


def test_zero_delta_exits_immediately():
    s = sample_stopping_times(MODEL_08, 0.0, 100, 500, np.random.default_rng(0))
    assert (s.values == 1).all()
    assert not s.censored.any()


def test_zero_noise_never_exits():
    quiet = DiscreteLinearModel(np.array([[0.8]]), np.array([[0.0]]), allow_degenerate=True)
    s = sample_stopping_times(quiet, 0.5, 40, 200, np.random.default_rng(1))
    assert (s.values == 40).all()
    assert s.censored.all()


def test_reference_mean_stopping_time():
    # theta_hat = (0.8, 1), delta = 3, tau_max = 100
    s = sample_stopping_times(MODEL_08, 3.0, 100, 100_000, np.random.default_rng(123))
    mean = empirical_mean(s)
    assert abs(mean - 28.6) < 0.5, mean


def test_censored_values_sit_at_cap():
    s = sample_stopping_times(MODEL_08, 3.0, 30, 20_000, np.random.default_rng(3))
    assert s.censored.any()
    assert (s.values[s.censored] == 30).all()
    # a boundary crossing exactly at the cap step is a real exit, not censoring
    uncensored = s.values[~s.censored]
    assert (uncensored <= 30).all() and (uncensored < 30).any()


def test_two_seeds_agree_within_clt():
    a = sample_stopping_times(MODEL_08, 3.0, 100, 5000, np.random.default_rng(10))
    b = sample_stopping_times(MODEL_08, 3.0, 100, 5000, np.random.default_rng(20))
    se = np.sqrt(np.var(a.values, ddof=1) / 5000 + np.var(b.values, ddof=1) / 5000)
    assert abs(empirical_mean(a) - empirical_mean(b)) < 3 * se


def test_sample_self_consistency_dkw():
    """Two fresh reference samples stay within the two-sample KS radius."""
    a = sample_stopping_times(MODEL_08, 3.0, 100, 100_000, np.random.default_rng(101))
    b = sample_stopping_times(MODEL_08, 3.0, 100, 100_000, np.random.default_rng(202))
    stat = ks_statistic(a.values, b.values)
    assert stat < kappa_ks(0.01, 100_000, 100_000), stat


def test_delta_monotone_pathwise():
    # same seed couples the noise paths, so larger delta can only exit later
    small = sample_stopping_times(MODEL_08, 2.0, 100, 4000, np.random.default_rng(55))
    large = sample_stopping_times(MODEL_08, 3.0, 100, 4000, np.random.default_rng(55))
    assert (small.values <= large.values).all()


def test_worker_count_invariance():
    ref = sample_stopping_times(MODEL_08, 3.0, 100, 40_000, np.random.default_rng(9), workers=1)
    for workers in (2, 3):
        out = sample_stopping_times(
            MODEL_08, 3.0, 100, 40_000, np.random.default_rng(9), workers=workers
        )
        np.testing.assert_array_equal(ref.values, out.values)
        np.testing.assert_array_equal(ref.censored, out.censored)


def test_continuous_zero_diffusion_censors():
    cm = ContinuousLinearModel(np.array([[-1.0]]), np.array([[0.0]]), allow_degenerate=True)
    s = sample_stopping_times_continuous(cm, 0.5, 2.0, 0.1, 100, np.random.default_rng(4))
    assert s.censored.all()
    np.testing.assert_allclose(s.values, 2.0)
    assert s.time_mode == "continuous"


def test_continuous_huge_threshold_censors():
    cm = ContinuousLinearModel(np.array([[-1.0]]), np.array([[1.0]]))
    s = sample_stopping_times_continuous(cm, 50.0, 5.0, 0.01, 300, np.random.default_rng(5))
    # stationary std ~ 0.7, a 50-sigma exit does not happen
    assert s.censored.all()


def test_continuous_values_are_step_multiples():
    cm = ContinuousLinearModel(np.array([[-1.0]]), np.array([[2.0]]))
    s = sample_stopping_times_continuous(cm, 1.0, 30.0, 0.05, 2000, np.random.default_rng(6))
    k = np.round(s.values / 0.05)
    np.testing.assert_allclose(s.values, k * 0.05, rtol=1e-12)
    assert (~s.censored).sum() > 1900


def test_continuous_step_halving_bias():
    # discrete monitoring of the continuous exit overshoots by O(sqrt(h))
    cm = ContinuousLinearModel(np.array([[-1.0]]), np.array([[np.sqrt(2.0)]]))
    m = 10_000
    h = 0.02
    coarse = sample_stopping_times_continuous(cm, 1.0, 40.0, h, m, np.random.default_rng(77))
    fine = sample_stopping_times_continuous(cm, 1.0, 40.0, h / 2, m, np.random.default_rng(78))
    diff = abs(empirical_mean(coarse) - empirical_mean(fine))
    se = np.sqrt(
        np.var(coarse.values, ddof=1) / m + np.var(fine.values, ddof=1) / m
    )
    assert diff < 0.5 * np.sqrt(h) + 3 * se, (diff, se)


def test_empirical_mean_and_cdf_small_sample():
    s = StoppingSample(np.array([2, 2, 5]), np.zeros(3, dtype=bool))
    assert empirical_mean(s) == pytest.approx(3.0)
    F = empirical_cdf(s)
    assert F(1.9) == 0.0
    assert F(2.0) == pytest.approx(2.0 / 3.0)
    assert F(4.999) == pytest.approx(2.0 / 3.0)
    assert F(5.0) == 1.0
    assert F(np.inf) == 1.0


def test_cdf_right_continuity_at_jump():
    F = EmpiricalCdf(np.array([1.0, 2.0, 2.0, 3.0]))
    eps = np.nextafter(2.0, -np.inf)
    assert F(eps) == pytest.approx(0.25)
    assert F(2.0) == pytest.approx(0.75)


def test_cdf_vectorized_call():
    F = EmpiricalCdf(np.array([1.0, 2.0, 3.0, 4.0]))
    out = F(np.array([0.5, 1.0, 2.5, 10.0]))
    np.testing.assert_allclose(out, [0.0, 0.25, 0.5, 1.0])


def test_empty_sample_rejected():
    with pytest.raises(ValueError):
        StoppingSample(np.array([]), np.array([], dtype=bool))
    with pytest.raises(ValueError):
        EmpiricalCdf(np.array([]))


def test_discrete_sample_validation():
    with pytest.raises(ValueError):
        StoppingSample(np.array([0, 2]), np.zeros(2, dtype=bool))  # discrete times start at 1
    with pytest.raises(ValueError):
        StoppingSample(np.array([1, 2]), np.zeros(3, dtype=bool))  # length mismatch
    StoppingSample(np.array([0.5, 1.5]), np.zeros(2, dtype=bool), "continuous")


def test_sample_csv_round_trip(tmp_path):
    s = sample_stopping_times(MODEL_08, 3.0, 50, 500, np.random.default_rng(33))
    path = tmp_path / "sample.csv"
    s.to_csv(path)
    back = StoppingSample.from_csv(path)
    np.testing.assert_allclose(back.values, s.values)
    np.testing.assert_array_equal(back.censored, s.censored)


def test_two_dimensional_model_sampling():
    model = DiscreteLinearModel(
        np.array([[0.9, 0.1], [0.0, 0.8]]),
        np.array([[1.0, 0.0], [0.0, 1.0]]),
    )
    s = sample_stopping_times(model, 4.0, 200, 3000, np.random.default_rng(44))
    assert 1 <= s.values.min() and s.values.max() <= 200
    assert empirical_mean(s) > 1.5
