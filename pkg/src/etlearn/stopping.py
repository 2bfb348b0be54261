"""Monte Carlo stopping-time sampling and empirical statistics.

A stopping time here is the first step (or instant) at which the prediction
error process z, started at zero, leaves the ball of radius delta. Runs that
never exit before the configured cap are recorded at the cap value with a
censoring flag; censored values enter means and CDFs at the cap.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .linsys import ContinuousLinearModel, DiscreteLinearModel

_CHUNK = 16384
WORKERS_ENV = "ETLEARN_WORKERS"

_TIME_MODES = ("discrete", "continuous")


@dataclass
class StoppingSample:
    """A batch of stopping times with censoring flags.

    values : stopping times, integer steps (discrete) or seconds (continuous)
    censored : True where the run was cut off at the cap
    time_mode : "discrete" or "continuous"
    """

    values: np.ndarray
    censored: np.ndarray
    time_mode: str = "discrete"

    def __post_init__(self):
        self.values = np.asarray(self.values)
        self.censored = np.asarray(self.censored, dtype=bool)
        if self.values.ndim != 1 or self.censored.shape != self.values.shape:
            raise ValueError("values and censored must be parallel 1-d sequences")
        if self.time_mode not in _TIME_MODES:
            raise ValueError(f"time_mode must be one of {_TIME_MODES}")
        if len(self.values) == 0:
            raise ValueError("a stopping-time sample must be nonempty")
        if self.time_mode == "discrete":
            if np.any(self.values < 1):
                raise ValueError("discrete stopping times must be >= 1 step")
        elif np.any(self.values <= 0):
            raise ValueError("continuous stopping times must be positive")

    @property
    def n(self) -> int:
        return len(self.values)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["value", "censored"])
            for value, flag in zip(self.values.tolist(), self.censored.tolist()):
                writer.writerow([value, int(flag)])

    @classmethod
    def from_csv(cls, path, time_mode: str = "discrete") -> "StoppingSample":
        values, censored = [], []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                values.append(float(row["value"]))
                censored.append(bool(int(row["censored"])))
        values_arr = np.asarray(values)
        if time_mode == "discrete":
            values_arr = values_arr.astype(np.int64)
        return cls(values_arr, np.asarray(censored), time_mode)


@dataclass
class EmpiricalCdf:
    """Right-continuous empirical step function F_n(t) = #{values <= t} / n."""

    sorted_values: np.ndarray

    def __post_init__(self):
        self.sorted_values = np.sort(np.asarray(self.sorted_values, dtype=float))
        if self.sorted_values.ndim != 1 or len(self.sorted_values) == 0:
            raise ValueError("need a nonempty 1-d value sequence")

    def __call__(self, t):
        counts = np.searchsorted(self.sorted_values, t, side="right")
        return counts / len(self.sorted_values)

    def to_csv(self, path) -> None:
        """Write (t, F(t)) rows at the jump points."""
        points = np.unique(self.sorted_values)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "F"])
            for t, f in zip(points.tolist(), self(points).tolist()):
                writer.writerow([t, f])


def empirical_mean(sample: StoppingSample) -> float:
    """Arithmetic mean of the sample values, censored entries at the cap."""
    if sample.n == 0:
        raise ValueError("empty stopping sample")
    return float(np.mean(sample.values))


def empirical_cdf(sample: StoppingSample) -> EmpiricalCdf:
    if sample.n == 0:
        raise ValueError("empty stopping sample")
    return EmpiricalCdf(np.asarray(sample.values, dtype=float))


def _resolve_workers(workers) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    if workers < 1:
        raise ValueError("worker count must be >= 1")
    return workers


def _chunk_sizes(m: int) -> list[int]:
    sizes = [_CHUNK] * (m // _CHUNK)
    if m % _CHUNK:
        sizes.append(m % _CHUNK)
    return sizes


def _run_chunks(kernel, sizes, generators, workers):
    # Chunk streams are independent and merged in chunk order, so the result
    # is a function of the root seed alone, not of the worker count.
    if workers == 1:
        results = [kernel(size, gen) for size, gen in zip(sizes, generators)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(kernel, sizes, generators))
    values = np.concatenate([r[0] for r in results])
    censored = np.concatenate([r[1] for r in results])
    return values, censored


def _discrete_exit_kernel(transition, factor, delta, tau_max):
    dim = transition.shape[0]
    threshold = delta * delta

    def kernel(size, gen):
        values = np.full(size, tau_max, dtype=np.int64)
        censored = np.ones(size, dtype=bool)
        z = np.zeros((size, dim))
        open_runs = np.ones(size, dtype=bool)
        for k in range(1, tau_max + 1):
            # Draw for every chain each step: the realization at (step, chain)
            # then never depends on which chains already exited, which keeps
            # same-seed runs pathwise coupled across different delta.
            z = z @ transition.T + gen.standard_normal((size, dim)) @ factor.T
            hit = open_runs & (np.einsum("ij,ij->i", z, z) >= threshold)
            values[hit] = k
            censored[hit] = False
            open_runs &= ~hit
            if not open_runs.any():
                break
        return values, censored

    return kernel


def sample_stopping_times(
    model: DiscreteLinearModel,
    delta: float,
    tau_max: int,
    m: int,
    rng: np.random.Generator,
    workers: int | None = None,
) -> StoppingSample:
    """Sample m first-exit times of z(k+1) = A z(k) + eps, z(0) = 0.

    The exit test ||z(k)|| >= delta starts at k = 1; runs still inside the
    ball at k = tau_max are censored at tau_max. Work is split into
    fixed-size chunks with one spawned generator each, so results are
    bit-reproducible for a given seed regardless of ``workers``.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    tau_max = int(tau_max)
    if tau_max < 1:
        raise ValueError("tau_max must be >= 1")
    if m < 1:
        raise ValueError("sample count m must be >= 1")
    workers = _resolve_workers(workers)
    sizes = _chunk_sizes(m)
    generators = rng.spawn(len(sizes))
    kernel = _discrete_exit_kernel(model.transition, model.noise_factor, delta, tau_max)
    values, censored = _run_chunks(kernel, sizes, generators, workers)
    return StoppingSample(values, censored, "discrete")


def sample_stopping_times_continuous(
    model: ContinuousLinearModel,
    delta: float,
    horizon: float,
    h: float,
    m: int,
    rng: np.random.Generator,
    workers: int | None = None,
) -> StoppingSample:
    """Euler-Maruyama analogue of :func:`sample_stopping_times`.

    The error SDE dz = drift z dt + diffusion dW is integrated at step h and
    monitored at every grid point; exit times are reported as k*h. Runs that
    survive the whole horizon are censored at ``n_steps * h``.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if h <= 0:
        raise ValueError("step size h must be positive")
    n_steps = int(round(horizon / h))
    if n_steps < 1:
        raise ValueError("horizon must cover at least one step")
    if m < 1:
        raise ValueError("sample count m must be >= 1")
    workers = _resolve_workers(workers)
    dim = model.dim
    drift = model.drift
    diffusion = model.diffusion
    threshold = delta * delta
    sqrt_h = np.sqrt(h)

    def kernel(size, gen):
        values = np.full(size, n_steps * h)
        censored = np.ones(size, dtype=bool)
        z = np.zeros((size, dim))
        open_runs = np.ones(size, dtype=bool)
        for k in range(1, n_steps + 1):
            noise = gen.standard_normal((size, dim)) @ diffusion.T
            z = z + z @ drift.T * h + sqrt_h * noise
            hit = open_runs & (np.einsum("ij,ij->i", z, z) >= threshold)
            values[hit] = k * h
            censored[hit] = False
            open_runs &= ~hit
            if not open_runs.any():
                break
        return values, censored

    sizes = _chunk_sizes(m)
    generators = rng.spawn(len(sizes))
    values, censored = _run_chunks(kernel, sizes, generators, workers)
    return StoppingSample(values, censored, "continuous")
