"""Output-measurement extension: steady-state Kalman filtering on the sender.

With only noisy outputs y = C x + v available, the sender runs a steady-state
Kalman filter built from its MODEL (the true parameters are unknown to both
agents) and the event trigger compares the filter estimate against the
receiver's open-loop prediction. At events the receiver resets to the filter
estimate, so the monitored error process is filter-vs-prediction, which in
innovation form is again a linear recursion driven by white noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .etse import CommunicationLog, TriggerConfig, state_trigger
from .linsys import DiscreteLinearModel, Trajectory, _square_matrix, _symmetric, spectral_radius
from .stopping import StoppingSample, sample_stopping_times


class DareConvergenceError(RuntimeError):
    """Riccati fixed-point iteration failed to converge."""


@dataclass(frozen=True)
class OutputModel:
    """Linear system with partial observations.

    A : n x n stable state transition
    C : m x n output map, (A, C) observable
    Q : n x n process noise covariance, symmetric positive definite
    R : m x m measurement noise covariance, symmetric positive definite
    """

    A: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    _q_factor: np.ndarray = field(init=False, repr=False, compare=False)
    _r_factor: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        a = _square_matrix(self.A, "A")
        c = np.atleast_2d(np.asarray(self.C, dtype=float))
        q = _symmetric(_square_matrix(self.Q, "Q"), "Q")
        r = _symmetric(_square_matrix(self.R, "R"), "R")
        n = a.shape[0]
        if c.shape[1] != n:
            raise ValueError("C column count must match state dimension")
        if q.shape[0] != n or r.shape[0] != c.shape[0]:
            raise ValueError("noise covariance dimensions disagree with A, C")
        if spectral_radius(a) >= 1:
            raise ValueError("A must have spectral radius < 1")
        if np.linalg.eigvalsh(q).min() <= 0:
            raise ValueError("Q must be positive definite")
        if np.linalg.eigvalsh(r).min() <= 0:
            raise ValueError("R must be positive definite")
        blocks = [c]
        for _ in range(n - 1):
            blocks.append(blocks[-1] @ a)
        if np.linalg.matrix_rank(np.vstack(blocks)) < n:
            raise ValueError("(A, C) must be observable")
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "C", c)
        object.__setattr__(self, "Q", q)
        object.__setattr__(self, "R", r)
        object.__setattr__(self, "_q_factor", np.linalg.cholesky(q))
        object.__setattr__(self, "_r_factor", np.linalg.cholesky(r))

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.C.shape[0]

    @property
    def state_noise_factor(self) -> np.ndarray:
        return self._q_factor

    @property
    def obs_noise_factor(self) -> np.ndarray:
        return self._r_factor

    def to_dict(self) -> dict:
        return {
            "dim": self.state_dim,
            "A": self.A.tolist(),
            "C": self.C.tolist(),
            "Q": self.Q.tolist(),
            "R": self.R.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "OutputModel":
        model = cls(
            np.asarray(doc["A"], dtype=float),
            np.asarray(doc["C"], dtype=float),
            np.asarray(doc["Q"], dtype=float),
            np.asarray(doc["R"], dtype=float),
        )
        if "dim" in doc and int(doc["dim"]) != model.state_dim:
            raise ValueError("declared dim does not match A shape")
        return model


@dataclass(frozen=True)
class SteadyStateFilter:
    """Stationary filter quantities: gain K, prediction error covariance P,
    innovation covariance S = C P C^T + R."""

    gain: np.ndarray
    error_cov: np.ndarray
    innovation_cov: np.ndarray


def solve_dare(model: OutputModel, tol: float = 1e-12, max_iter: int = 100_000) -> SteadyStateFilter:
    """Fixed-point iteration of the Riccati map from P0 = Q.

    Iterates P <- A P A^T + Q - A P C^T (C P C^T + R)^-1 C P A^T with
    symmetrization each step until the max-abs change drops below ``tol``.

    Raises:
        DareConvergenceError: no convergence within ``max_iter`` iterations,
            or the innovation covariance becomes singular.
    """
    a, c, q, r = model.A, model.C, model.Q, model.R
    p = q.copy()
    for _ in range(max_iter):
        cp = c @ p
        s = cp @ c.T + r
        try:
            gain_term = np.linalg.solve(s, cp @ a.T)
        except np.linalg.LinAlgError as exc:
            raise DareConvergenceError("innovation covariance is singular") from exc
        p_next = a @ p @ a.T + q - a @ p @ c.T @ gain_term
        p_next = 0.5 * (p_next + p_next.T)
        if np.max(np.abs(p_next - p)) < tol:
            p = p_next
            break
        p = p_next
    else:
        raise DareConvergenceError(f"Riccati iteration did not converge in {max_iter} steps")
    s = c @ p @ c.T + r
    gain = np.linalg.solve(s, c @ p).T
    return SteadyStateFilter(gain, p, 0.5 * (s + s.T))


def kf_step(filt: SteadyStateFilter, model: OutputModel, xhat, y_next) -> np.ndarray:
    """One steady-state filter update: A xhat + K (y_next - C A xhat).

    Accepts a single state vector (n,) with measurement (m,), or batches
    shaped (..., n) and (..., m).
    """
    xhat = np.asarray(xhat, dtype=float)
    y_next = np.asarray(y_next, dtype=float)
    if xhat.shape[-1:] != (model.state_dim,) or y_next.shape[-1:] != (model.obs_dim,):
        raise ValueError("state or measurement dimension mismatch")
    predicted = xhat @ model.A.T
    innovation = y_next - predicted @ model.C.T
    return predicted + innovation @ filt.gain.T


def run_etse_kf(
    plant: OutputModel,
    model: OutputModel,
    cfg: TriggerConfig,
    steps: int,
    burn_in: int,
    rng: np.random.Generator,
) -> tuple[Trajectory, Trajectory, Trajectory, CommunicationLog]:
    """Event-triggered loop with a filtering sender.

    The plant evolves with its true noise; measurements pass through the true
    C and R; the sender filters with the gain solved from ``model``; the
    receiver predicts with the model transition and resets to the filter
    estimate at events. The first ``burn_in`` steps run the filter only and
    are excluded from the returned trajectories and log; recording starts
    with receiver and sender synchronized.
    """
    if plant.state_dim != model.state_dim or plant.obs_dim != model.obs_dim:
        raise ValueError("plant and model dimensions disagree")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")
    filt = solve_dare(model)
    n = plant.state_dim
    x = np.zeros(n)
    xhat = np.zeros(n)
    for _ in range(burn_in):
        x, xhat = _plant_and_filter_step(plant, model, filt, x, xhat, rng)
    x_pred = xhat.copy()
    states = np.empty((steps + 1, n))
    estimates = np.empty((steps + 1, n))
    predictions = np.empty((steps + 1, n))
    states[0], estimates[0], predictions[0] = x, xhat, x_pred
    log = CommunicationLog()
    since = 0
    for k in range(1, steps + 1):
        x, xhat = _plant_and_filter_step(plant, model, filt, x, xhat, rng)
        x_pred = model.A @ x_pred
        since += 1
        fired = state_trigger(xhat, x_pred, cfg.delta)
        if fired or since >= cfg.tau_max:
            log.record(k, censored=not fired)
            x_pred = xhat.copy()
            since = 0
        states[k], estimates[k], predictions[k] = x, xhat, x_pred
    times = np.arange(steps + 1)
    return (
        Trajectory(times, states),
        Trajectory(times, estimates),
        Trajectory(times, predictions),
        log,
    )


def _plant_and_filter_step(plant, model, filt, x, xhat, rng):
    x_next = x @ plant.A.T + rng.standard_normal(x.shape) @ plant.state_noise_factor.T
    y_shape = x.shape[:-1] + (plant.obs_dim,)
    y_next = x_next @ plant.C.T + rng.standard_normal(y_shape) @ plant.obs_noise_factor.T
    return x_next, kf_step(filt, model, xhat, y_next)


def collect_gaps_kf(
    plant: OutputModel,
    model: OutputModel,
    delta: float,
    tau_max: int,
    count: int,
    rng: np.random.Generator,
    chains: int = 64,
    burn_in: int = 1000,
) -> StoppingSample:
    """Harvest stationary filter-vs-prediction gaps, vectorized across chains.

    Counterpart of etse.collect_gaps for the output-measurement loop; the
    default burn-in lets the filter reach stationarity before gaps count.
    Every chain contributes the same quota of consecutive gaps (truncation by
    gap index, never by wall clock, which would favor short gaps).
    """
    if plant.state_dim != model.state_dim or plant.obs_dim != model.obs_dim:
        raise ValueError("plant and model dimensions disagree")
    if count < 1 or chains < 1:
        raise ValueError("count and chains must be >= 1")
    filt = solve_dare(model)
    n = plant.state_dim
    tau_max = int(tau_max)
    x = np.zeros((chains, n))
    xhat = np.zeros((chains, n))
    for _ in range(burn_in):
        x, xhat = _plant_and_filter_step(plant, model, filt, x, xhat, rng)
    x_pred = xhat.copy()
    since = np.zeros(chains, dtype=np.int64)
    threshold = delta * delta
    quota = -(-count // chains)
    need = np.full(chains, quota, dtype=np.int64)
    gap_values: list[list[int]] = [[] for _ in range(chains)]
    gap_censored: list[list[bool]] = [[] for _ in range(chains)]
    while (need > 0).any():
        x, xhat = _plant_and_filter_step(plant, model, filt, x, xhat, rng)
        x_pred = x_pred @ model.A.T
        since += 1
        err = xhat - x_pred
        crossed = np.einsum("ij,ij->i", err, err) >= threshold
        fire = crossed | (since >= tau_max)
        for c in np.flatnonzero(fire & (need > 0)):
            gap_values[c].append(int(since[c]))
            gap_censored[c].append(not crossed[c])
            need[c] -= 1
        x_pred[fire] = xhat[fire]
        since[fire] = 0
    values = [g for per_chain in gap_values for g in per_chain]
    censored = [c for per_chain in gap_censored for c in per_chain]
    return StoppingSample(
        np.asarray(values[:count], dtype=np.int64),
        np.asarray(censored[:count], dtype=bool),
        "discrete",
    )


def innovation_error_model(model: OutputModel) -> DiscreteLinearModel:
    """Error-process model in innovation form.

    Between events the filter-vs-prediction error follows
    z(k+1) = A z(k) + K I(k) with white innovations I ~ N(0, S), so the
    driving noise covariance is K S K^T (rank-deficient when obs_dim <
    state_dim, hence the degenerate flag).
    """
    filt = solve_dare(model)
    noise_cov = filt.gain @ filt.innovation_cov @ filt.gain.T
    return DiscreteLinearModel(
        model.A, 0.5 * (noise_cov + noise_cov.T), allow_degenerate=True
    )


def sample_stopping_times_kf(
    model: OutputModel,
    delta: float,
    tau_max: int,
    m: int,
    rng: np.random.Generator,
    workers: int | None = None,
) -> StoppingSample:
    """Model-based stopping times via the innovation-form error process."""
    return sample_stopping_times(innovation_error_model(model), delta, tau_max, m, rng, workers)
