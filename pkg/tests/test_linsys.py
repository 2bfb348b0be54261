"""Linear system models: stepping, discretization, serialization."""

import math

import numpy as np
import pytest

from etlearn import (
    ContinuousLinearModel,
    DiscreteLinearModel,
    Trajectory,
    discretize,
    model_from_dict,
    step_discrete,
    step_euler_maruyama,
)


def scalar_model(a=0.9, q=1.0, **flags):
    return DiscreteLinearModel(np.array([[a]]), np.array([[q]]), **flags)


def test_step_discrete_noiseless_scalar():
    model = scalar_model(0.9, 0.0, allow_degenerate=True)
    out = step_discrete(model, 1.0, np.random.default_rng(0))
    np.testing.assert_allclose(out, [0.9])


def test_step_discrete_noiseless_matrix():
    A = np.array([[0.5, 0.1], [0.0, 0.3]])
    model = DiscreteLinearModel(A, np.zeros((2, 2)), allow_degenerate=True)
    x = np.array([1.0, 2.0])
    out = step_discrete(model, x, np.random.default_rng(0))
    np.testing.assert_allclose(out, A @ x)


def test_step_discrete_batched_shape():
    model = scalar_model()
    batch = np.zeros((7, 1))
    out = step_discrete(model, batch, np.random.default_rng(3))
    assert out.shape == (7, 1)
    # distinct noise per batch row
    assert len(np.unique(out)) == 7


def test_step_discrete_seed_reproducible():
    model = scalar_model(0.8, 2.0)
    a = step_discrete(model, np.ones((5, 1)), np.random.default_rng(42))
    b = step_discrete(model, np.ones((5, 1)), np.random.default_rng(42))
    np.testing.assert_array_equal(a, b)


def test_stationary_variance_scalar():
    # x(k+1) = 0.9 x(k) + w, Var w = 1 -> stationary variance 1/(1-0.81)
    model = scalar_model(0.9, 1.0)
    rng = np.random.default_rng(7)
    x = np.zeros((50_000, 1))
    for _ in range(250):
        x = step_discrete(model, x, rng)
    var = float(np.var(x))
    assert abs(var - 1.0 / 0.19) / (1.0 / 0.19) < 0.02


def test_stationary_variance_memoryless():
    model = scalar_model(0.0, 1.0)
    rng = np.random.default_rng(8)
    x = np.zeros((50_000, 1))
    for _ in range(5):
        x = step_discrete(model, x, rng)
    assert abs(float(np.var(x)) - 1.0) < 0.02


def test_discretize_scalar_closed_form():
    # dx = -x dt + dW over h=0.5: Ad = e^{-h}, Qd = (1 - e^{-2h})/2
    cm = ContinuousLinearModel(np.array([[-1.0]]), np.array([[1.0]]))
    dm = discretize(cm, 0.5)
    np.testing.assert_allclose(dm.transition[0, 0], math.exp(-0.5), rtol=1e-9)
    np.testing.assert_allclose(dm.noise_cov[0, 0], (1 - math.exp(-1.0)) / 2.0, rtol=1e-9)


def test_discretize_semigroup():
    cm = ContinuousLinearModel(
        np.array([[-1.0, 0.5], [0.0, -2.0]]),
        np.array([[0.8, 0.2], [0.2, 0.6]]),
    )
    d1 = discretize(cm, 0.3)
    d2 = discretize(cm, 0.6)
    A2 = d1.transition @ d1.transition
    Q2 = d1.transition @ d1.noise_cov @ d1.transition.T + d1.noise_cov
    np.testing.assert_allclose(A2, d2.transition, atol=1e-10)
    np.testing.assert_allclose(Q2, d2.noise_cov, atol=1e-10)


def test_discretize_transition_vs_rk4():
    # independent check of the matrix exponential: RK4 on dX = drift X
    drift = np.array([[-1.0, 0.5], [0.0, -2.0]])
    cm = ContinuousLinearModel(drift, np.eye(2))
    h = 0.7
    n_sub = 2000
    dt = h / n_sub
    X = np.eye(2)
    for _ in range(n_sub):
        k1 = drift @ X
        k2 = drift @ (X + 0.5 * dt * k1)
        k3 = drift @ (X + 0.5 * dt * k2)
        k4 = drift @ (X + dt * k3)
        X = X + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    dm = discretize(cm, h)
    np.testing.assert_allclose(dm.transition, X, atol=1e-8)


def test_discretize_noise_vs_euler_maruyama():
    # covariance of x(h) from fine-step EM rollouts as an independent oracle
    drift = np.array([[-1.0, 0.5], [0.0, -2.0]])
    diffusion = np.array([[0.8, 0.2], [0.2, 0.6]])
    cm = ContinuousLinearModel(drift, diffusion)
    h_total = 0.5
    h_em = 1e-3
    m = 200_000
    rng = np.random.default_rng(12)
    x = np.zeros((m, 2))
    for _ in range(int(round(h_total / h_em))):
        x = step_euler_maruyama(cm, x, h_em, rng)
    emp_cov = np.cov(x.T)
    dm = discretize(cm, h_total)
    rel = np.linalg.norm(emp_cov - dm.noise_cov) / np.linalg.norm(dm.noise_cov)
    assert rel < 0.015, rel


def test_discretize_zero_diffusion():
    cm = ContinuousLinearModel(np.array([[-2.0]]), np.array([[0.0]]), allow_degenerate=True)
    dm = discretize(cm, 1.0)
    np.testing.assert_allclose(dm.transition[0, 0], math.exp(-2.0), rtol=1e-10)
    assert abs(dm.noise_cov[0, 0]) < 1e-15


def test_euler_maruyama_drift_only():
    cm = ContinuousLinearModel(np.array([[-1.0]]), np.array([[0.0]]), allow_degenerate=True)
    out = step_euler_maruyama(cm, 2.0, 0.01, np.random.default_rng(0))
    np.testing.assert_allclose(out, [2.0 - 2.0 * 0.01])


def test_euler_maruyama_noise_scale():
    # pure diffusion: increments are sqrt(h) * diffusion * N(0, I)
    cm = ContinuousLinearModel(np.zeros((1, 1)), np.array([[2.0]]), allow_marginal=True)
    rng = np.random.default_rng(5)
    x = step_euler_maruyama(cm, np.zeros((200_000, 1)), 0.25, rng)
    # Var = h * (diffusion diffusion^T) = 0.25 * 4 = 1
    assert abs(float(np.var(x)) - 1.0) < 0.02


def test_model_serialization_round_trip():
    model = DiscreteLinearModel(
        np.array([[0.5, 0.2], [0.0, 0.7]]),
        np.array([[1.0, 0.1], [0.1, 2.0]]),
    )
    doc = model.to_dict()
    back = model_from_dict(doc)
    np.testing.assert_array_equal(back.transition, model.transition)
    np.testing.assert_array_equal(back.noise_cov, model.noise_cov)


def test_continuous_serialization_round_trip():
    cm = ContinuousLinearModel(np.array([[-1.0]]), np.array([[1.5]]))
    back = model_from_dict(cm.to_dict())
    assert isinstance(back, ContinuousLinearModel)
    np.testing.assert_array_equal(back.drift, cm.drift)


def test_validation_rejects_bad_models():
    with pytest.raises(ValueError):
        DiscreteLinearModel(np.array([[1.0, 0.0]]), np.eye(2))  # non-square
    with pytest.raises(ValueError):
        DiscreteLinearModel(np.array([[0.5]]), np.array([[-1.0]]))  # negative variance
    with pytest.raises(ValueError):
        DiscreteLinearModel(np.array([[0.5]]), np.array([[0.0]]))  # singular, no flag
    with pytest.raises(ValueError):
        DiscreteLinearModel(np.array([[1.0]]), np.array([[1.0]]))  # marginally stable
    with pytest.raises(ValueError):
        # asymmetric covariance
        DiscreteLinearModel(
            np.array([[0.5, 0.0], [0.0, 0.5]]),
            np.array([[1.0, 0.3], [0.0, 1.0]]),
        )
    with pytest.raises(ValueError):
        ContinuousLinearModel(np.array([[1.0]]), np.array([[1.0]]))  # unstable drift


def test_marginal_flag_admits_random_walk():
    model = DiscreteLinearModel(np.array([[1.0]]), np.array([[1.0]]), allow_marginal=True)
    assert model.spectral_radius == pytest.approx(1.0)
    cm = ContinuousLinearModel(np.zeros((1, 1)), np.array([[1.0]]), allow_marginal=True)
    assert cm.drift[0, 0] == 0.0


def test_trajectory_validation():
    t = Trajectory(np.array([0.0, 1.0, 2.0]), np.zeros((3, 2)))
    assert len(t) == 3
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 2.0, 1.0]), np.zeros((3, 2)))
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 1.0]), np.zeros((3, 2)))


def test_state_dimension_mismatch_raises():
    model = DiscreteLinearModel(np.eye(2) * 0.5, np.eye(2))
    with pytest.raises(ValueError):
        step_discrete(model, np.zeros(3), np.random.default_rng(0))
