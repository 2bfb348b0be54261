"""Least-squares identification of (A, Q) from full-rate state recordings."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .linsys import DiscreteLinearModel, step_discrete


class IdentificationError(RuntimeError):
    """Identification could not produce a usable model."""


class RankDeficientDataError(IdentificationError):
    """Regressor matrix does not excite all state directions."""


class UnstableEstimateError(IdentificationError):
    """Fitted transition has spectral radius >= 1."""


def _min_transitions(dim: int) -> int:
    # Enough rows for a well-posed least-squares problem plus residual covariance.
    return dim * (dim + 1)


@dataclass
class LearningDataset:
    """State sequence x(0..N) recorded at full communication rate."""

    states: np.ndarray

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        if self.states.ndim != 2:
            raise ValueError("states must be a 2-d array (time, dim)")
        if len(self.states) - 1 < _min_transitions(self.dim):
            raise ValueError(
                f"need at least {_min_transitions(self.dim)} transitions, "
                f"got {len(self.states) - 1}"
            )

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def transitions(self) -> int:
        return len(self.states) - 1

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step"] + [f"x{i}" for i in range(self.dim)])
            for step, row in enumerate(self.states.tolist()):
                writer.writerow([step] + row)

    @classmethod
    def from_csv(cls, path) -> "LearningDataset":
        rows = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            dim = len(header) - 1
            for row in reader:
                rows.append([float(v) for v in row[1 : dim + 1]])
        return cls(np.asarray(rows))


def identify_discrete(data: LearningDataset) -> DiscreteLinearModel:
    """Fit x(k+1) = A x(k) + eps by least squares; Q from residual covariance.

    Raises RankDeficientDataError when the regressors do not span the state
    space and UnstableEstimateError when the fit has spectral radius >= 1.
    """
    before = data.states[:-1]
    after = data.states[1:]
    solution, _, rank, _ = np.linalg.lstsq(before, after, rcond=None)
    if rank < data.dim:
        raise RankDeficientDataError(
            f"regressor rank {rank} < state dimension {data.dim}"
        )
    transition = solution.T
    residuals = after - before @ solution
    noise_cov = residuals.T @ residuals / data.transitions
    noise_cov = 0.5 * (noise_cov + noise_cov.T)
    rho = float(np.max(np.abs(np.linalg.eigvals(transition))))
    if rho >= 1:
        raise UnstableEstimateError(f"fitted transition has spectral radius {rho:.4f}")
    return DiscreteLinearModel(transition, noise_cov, allow_degenerate=True)


def learning_episode(
    plant: DiscreteLinearModel,
    episode_length: int,
    rng: np.random.Generator,
    x0=None,
) -> LearningDataset:
    """Record the plant at full rate for ``episode_length`` transitions.

    Every state in the episode counts as a transmission; the harness accounts
    the episode as learning cost.
    """
    minimum = _min_transitions(plant.dim)
    if episode_length < minimum:
        raise ValueError(f"episode_length must be >= {minimum}")
    x = np.zeros(plant.dim) if x0 is None else np.asarray(x0, dtype=float).reshape(plant.dim)
    states = np.empty((episode_length + 1, plant.dim))
    states[0] = x
    for k in range(1, episode_length + 1):
        x = step_discrete(plant, x, rng)
        states[k] = x
    return LearningDataset(states)
