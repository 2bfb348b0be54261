"""Event-triggered estimation loop: trigger rule, runs, gap extraction."""

import csv

import numpy as np
import pytest

from etlearn import (
    CommunicationLog,
    DiscreteLinearModel,
    TriggerConfig,
    collect_gaps,
    intercomm_times,
    kappa_ks,
    ks_statistic,
    run_etse,
    sample_stopping_times,
    state_trigger,
)
from etlearn.etse import write_run_csv


PLANT = DiscreteLinearModel(np.array([[0.9]]), np.array([[1.0]]))
MODEL = DiscreteLinearModel(np.array([[0.8]]), np.array([[1.0]]))


def test_state_trigger_examples():
    assert state_trigger(np.array([3.0, 4.0]), np.array([0.0, 0.0]), 5.0)  # boundary fires
    assert not state_trigger(np.array([3.0, 4.0]), np.array([0.0, 0.0]), 5.0 + 1e-9)
    assert state_trigger(np.array([1.5]), np.array([0.2]), 1.0)
    assert not state_trigger(np.array([0.5]), np.array([0.5]), 0.1)


def test_state_trigger_shape_mismatch():
    with pytest.raises(ValueError):
        state_trigger(np.zeros(2), np.zeros(3), 1.0)


def test_run_etse_error_stays_below_delta():
    cfg = TriggerConfig(delta=3.0, tau_max=10_000, n=10, m=10, alpha=0.05)
    traj, pred, log = run_etse(PLANT, MODEL, cfg, 3000, np.random.default_rng(0))
    err = np.linalg.norm(traj.states - pred.states, axis=1)
    # recorded predictions are post-reset, so every recorded error is < delta
    assert err.max() < 3.0
    assert len(log) > 50


def test_run_etse_noiseless_plant_never_fires():
    quiet = DiscreteLinearModel(np.array([[0.9]]), np.array([[0.0]]), allow_degenerate=True)
    match = DiscreteLinearModel(np.array([[0.9]]), np.array([[1.0]]))
    cfg = TriggerConfig(delta=0.5, tau_max=10_000, n=10, m=10, alpha=0.05)
    traj, pred, log = run_etse(quiet, match, cfg, 500, np.random.default_rng(1))
    assert len(log) == 0
    np.testing.assert_allclose(traj.states, pred.states)


def test_run_etse_forced_event_at_tau_max():
    quiet = DiscreteLinearModel(np.array([[0.9]]), np.array([[0.0]]), allow_degenerate=True)
    match = DiscreteLinearModel(np.array([[0.9]]), np.array([[1.0]]))
    cfg = TriggerConfig(delta=0.5, tau_max=25, n=10, m=10, alpha=0.05)
    _, _, log = run_etse(quiet, match, cfg, 100, np.random.default_rng(1))
    assert log.event_steps == [25, 50, 75, 100]
    assert all(log.censored_flags)


def test_intercomm_times_differences():
    log = CommunicationLog()
    for step, censored in ((5, False), (12, False), (14, True)):
        log.record(step, censored=censored)
    s = intercomm_times(log)
    np.testing.assert_array_equal(s.values, [5, 7, 2])
    np.testing.assert_array_equal(s.censored, [False, False, True])


def test_intercomm_times_empty_log():
    with pytest.raises(ValueError):
        intercomm_times(CommunicationLog())


def test_log_rejects_nonmonotone_steps():
    log = CommunicationLog()
    log.record(5, censored=False)
    with pytest.raises(ValueError):
        log.record(5, censored=False)


def _reference_gap_mean(a_plant, a_model, delta, steps, seed):
    # independent plain-python reimplementation of the send-on-delta loop
    rng = np.random.default_rng(seed)
    x = 0.0
    x_pred = 0.0
    gaps = []
    since = 0
    for _ in range(steps):
        x = a_plant * x + rng.standard_normal()
        x_pred = a_model * x_pred
        since += 1
        if abs(x - x_pred) >= delta:
            gaps.append(since)
            since = 0
            x_pred = x
    return float(np.mean(gaps)), len(gaps)


def test_run_etse_mean_gap_matches_reference_simulator():
    cfg = TriggerConfig(delta=3.0, tau_max=1000, n=10, m=10, alpha=0.05)
    _, _, log = run_etse(PLANT, MODEL, cfg, 100_000, np.random.default_rng(7))
    ours = float(np.mean(intercomm_times(log).values))
    ref_mean, ref_count = _reference_gap_mean(0.9, 0.8, 3.0, 100_000, 17)
    assert ref_count > 4000
    assert abs(ours - ref_mean) / ref_mean < 0.05, (ours, ref_mean)


def test_gap_lag1_autocorrelation_small():
    cfg = TriggerConfig(delta=3.0, tau_max=1000, n=10, m=10, alpha=0.05)
    _, _, log = run_etse(PLANT, PLANT, cfg, 60_000, np.random.default_rng(11))
    v = intercomm_times(log).values.astype(float)
    v = v - v.mean()
    rho1 = float(np.dot(v[:-1], v[1:]) / np.dot(v, v))
    assert abs(rho1) < 3.0 / np.sqrt(len(v)), rho1


def test_matched_gaps_agree_with_sampler():
    # when the model is exact, live gaps follow the model's stopping law
    gaps = collect_gaps(PLANT, PLANT, 3.0, 100, 10_000, np.random.default_rng(21))
    ref = sample_stopping_times(PLANT, 3.0, 100, 10_000, np.random.default_rng(22))
    stat = ks_statistic(gaps.values, ref.values)
    assert stat < kappa_ks(0.01, 10_000, 10_000), stat


def test_collect_gaps_matches_sequential_run():
    batched = collect_gaps(PLANT, MODEL, 3.0, 100, 3000, np.random.default_rng(31))
    cfg = TriggerConfig(delta=3.0, tau_max=100, n=10, m=10, alpha=0.05)
    _, _, log = run_etse(PLANT, MODEL, cfg, 60_000, np.random.default_rng(32))
    sequential = intercomm_times(log).values
    stat = ks_statistic(batched.values, sequential)
    assert stat < kappa_ks(0.01, len(batched.values), len(sequential)), stat


def test_collect_gaps_validation():
    with pytest.raises(ValueError):
        collect_gaps(PLANT, MODEL, 3.0, 100, 0, np.random.default_rng(0))
    other = DiscreteLinearModel(np.eye(2) * 0.5, np.eye(2))
    with pytest.raises(ValueError):
        collect_gaps(PLANT, other, 3.0, 100, 10, np.random.default_rng(0))


def test_run_etse_seed_reproducible():
    cfg = TriggerConfig(delta=3.0, tau_max=100, n=10, m=10, alpha=0.05)
    a = run_etse(PLANT, MODEL, cfg, 2000, np.random.default_rng(5))
    b = run_etse(PLANT, MODEL, cfg, 2000, np.random.default_rng(5))
    np.testing.assert_array_equal(a[0].states, b[0].states)
    assert a[2].event_steps == b[2].event_steps
    assert a[2].censored_flags == b[2].censored_flags


def test_write_run_csv(tmp_path):
    cfg = TriggerConfig(delta=3.0, tau_max=100, n=10, m=10, alpha=0.05)
    traj, pred, log = run_etse(PLANT, MODEL, cfg, 200, np.random.default_rng(6))
    path = tmp_path / "run.csv"
    write_run_csv(path, traj, pred, log)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 201
    assert set(rows[0]) == {"step", "x0", "x_pred0", "event"}
    marked = [int(r["step"]) for r in rows if r["event"] == "1"]
    assert marked == log.event_steps


def test_trigger_config_validation():
    with pytest.raises(ValueError):
        TriggerConfig(delta=0.0, tau_max=100, n=10, m=10, alpha=0.05)
    with pytest.raises(ValueError):
        TriggerConfig(delta=1.0, tau_max=0, n=10, m=10, alpha=0.05)
    with pytest.raises(ValueError):
        TriggerConfig(delta=1.0, tau_max=100, n=0, m=10, alpha=0.05)
    with pytest.raises(ValueError):
        TriggerConfig(delta=1.0, tau_max=100, n=10, m=10, alpha=1.0)
