"""Event-triggered state estimation loop for the full-state case.

The sender observes the plant state x and transmits it only when the
receiver's open-loop prediction x_pred (propagated with the model transition)
has drifted too far: ||x - x_pred|| >= delta, or when tau_max steps have
passed since the last transmission. On transmission the receiver resets
x_pred to x, so the prediction error restarts at zero.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .linsys import DiscreteLinearModel, Trajectory, step_discrete
from .stopping import StoppingSample


@dataclass(frozen=True)
class TriggerConfig:
    """Threshold and sample-size settings shared by the estimation loop and triggers.

    delta : state-trigger threshold (Euclidean norm units)
    tau_max : forced-communication cap in steps
    n : empirical buffer size
    m : model-based Monte Carlo sample count
    alpha : confidence level of the learning triggers, in (0, 1)
    """

    delta: float
    tau_max: int
    n: int
    m: int
    alpha: float

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.tau_max < 1:
            raise ValueError("tau_max must be >= 1")
        if self.n < 1 or self.m < 1:
            raise ValueError("sample sizes n and m must be >= 1")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")


@dataclass
class CommunicationLog:
    """Steps at which a transmission happened, with forced-cap flags."""

    event_steps: list[int] = field(default_factory=list)
    censored_flags: list[bool] = field(default_factory=list)

    def record(self, step: int, censored: bool) -> None:
        if self.event_steps and step <= self.event_steps[-1]:
            raise ValueError("event steps must be strictly increasing")
        self.event_steps.append(int(step))
        self.censored_flags.append(bool(censored))

    def __len__(self) -> int:
        return len(self.event_steps)


@dataclass
class EtseState:
    """Mutable loop state: true state, receiver prediction, steps since last event."""

    x: np.ndarray
    x_pred: np.ndarray
    steps_since_comm: int = 0


def state_trigger(x, x_pred, delta: float) -> bool:
    """True iff the Euclidean prediction error reaches delta (boundary fires)."""
    x = np.asarray(x, dtype=float)
    x_pred = np.asarray(x_pred, dtype=float)
    if x.shape != x_pred.shape:
        raise ValueError("x and x_pred must have equal dimensions")
    return bool(np.linalg.norm(x - x_pred) >= delta)


def run_etse(
    plant: DiscreteLinearModel,
    model: DiscreteLinearModel,
    cfg: TriggerConfig,
    steps: int,
    rng: np.random.Generator,
    x0=None,
) -> tuple[Trajectory, Trajectory, CommunicationLog]:
    """Run the sender/receiver loop for ``steps`` steps.

    Returns the true trajectory, the receiver's prediction trajectory
    (post-reset values at event steps), and the communication log. Plant and
    receiver start synchronized at x0 (zeros by default).
    """
    if plant.dim != model.dim:
        raise ValueError("plant and model dimensions disagree")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    dim = plant.dim
    x = np.zeros(dim) if x0 is None else np.asarray(x0, dtype=float).reshape(dim)
    x_pred = x.copy()
    states = np.empty((steps + 1, dim))
    predictions = np.empty((steps + 1, dim))
    states[0] = x
    predictions[0] = x_pred
    log = CommunicationLog()
    since = 0
    for k in range(1, steps + 1):
        x = step_discrete(plant, x, rng)
        x_pred = model.transition @ x_pred
        since += 1
        fired = state_trigger(x, x_pred, cfg.delta)
        if fired or since >= cfg.tau_max:
            log.record(k, censored=not fired)
            x_pred = x.copy()
            since = 0
        states[k] = x
        predictions[k] = x_pred
    times = np.arange(steps + 1)
    return Trajectory(times, states), Trajectory(times, predictions), log


def intercomm_times(log: CommunicationLog) -> StoppingSample:
    """Gaps between successive events; the first gap is measured from step 0."""
    if len(log) == 0:
        raise ValueError("communication log is empty")
    events = np.asarray(log.event_steps, dtype=np.int64)
    gaps = np.diff(events, prepend=0)
    return StoppingSample(gaps, np.asarray(log.censored_flags), "discrete")


def collect_gaps(
    plant: DiscreteLinearModel,
    model: DiscreteLinearModel,
    delta: float,
    tau_max: int,
    count: int,
    rng: np.random.Generator,
    chains: int = 64,
    burn_in: int | None = None,
) -> StoppingSample:
    """Harvest ``count`` stationary inter-communication times.

    Runs ``chains`` independent synchronized sender/receiver loops in
    lockstep after a burn-in; every chain contributes the same quota of
    consecutive gaps. Truncation is by gap index, never by wall clock, so
    chains mid-gap at the end do not skew the sample toward short gaps.
    Distributionally equivalent to a single long :func:`run_etse` pass (the
    error process restarts after every event) but vectorized across chains.
    """
    if plant.dim != model.dim:
        raise ValueError("plant and model dimensions disagree")
    if count < 1:
        raise ValueError("count must be >= 1")
    if chains < 1:
        raise ValueError("chains must be >= 1")
    tau_max = int(tau_max)
    if burn_in is None:
        rho = min(max(plant.spectral_radius, model.spectral_radius), 0.999)
        burn_in = int(min(10_000, max(100, math.ceil(10.0 / (1.0 - rho)))))
    dim = plant.dim
    x = np.zeros((chains, dim))
    for _ in range(burn_in):
        x = step_discrete(plant, x, rng)
    x_pred = x.copy()
    since = np.zeros(chains, dtype=np.int64)
    threshold = delta * delta
    quota = -(-count // chains)
    need = np.full(chains, quota, dtype=np.int64)
    gap_values: list[list[int]] = [[] for _ in range(chains)]
    gap_censored: list[list[bool]] = [[] for _ in range(chains)]
    while (need > 0).any():
        x = step_discrete(plant, x, rng)
        x_pred = x_pred @ model.transition.T
        since += 1
        err = x - x_pred
        crossed = np.einsum("ij,ij->i", err, err) >= threshold
        fire = crossed | (since >= tau_max)
        for c in np.flatnonzero(fire & (need > 0)):
            gap_values[c].append(int(since[c]))
            gap_censored[c].append(not crossed[c])
            need[c] -= 1
        x_pred[fire] = x[fire]
        since[fire] = 0
    values = np.asarray([g for per_chain in gap_values for g in per_chain], dtype=np.int64)
    censored = np.asarray(
        [c for per_chain in gap_censored for c in per_chain], dtype=bool
    )
    return StoppingSample(values[:count], censored[:count], "discrete")


def write_run_csv(path, trajectory: Trajectory, predictions: Trajectory, log: CommunicationLog) -> None:
    """Export a run as rows (step, x..., x_pred..., event_flag)."""
    dim = trajectory.states.shape[1]
    event_steps = set(log.event_steps)
    header = (
        ["step"]
        + [f"x{i}" for i in range(dim)]
        + [f"x_pred{i}" for i in range(dim)]
        + ["event"]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row, step in enumerate(np.asarray(trajectory.times).tolist()):
            writer.writerow(
                [step]
                + trajectory.states[row].tolist()
                + predictions.states[row].tolist()
                + [int(step in event_steps)]
            )
