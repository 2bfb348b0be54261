"""Learning triggers: decide from stopping-time statistics whether the model is wrong.

Mean triggers compare an empirical mean against a reference (analytic or
Monte Carlo) and fire when the deviation reaches a Hoeffding-type radius
kappa; they fire on >=. CDF triggers compare whole distributions through the
Kolmogorov-Smirnov sup-distance against a DKW-type radius and fire on strict >.
Each radius is calibrated so that a true model fires with probability at most
alpha per evaluation. Repeated evaluations over a long run inflate the
overall false-positive probability beyond alpha; no correction is applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .stopping import StoppingSample

VALID_KINDS = ("exact_mean", "approx_mean", "exact_cdf", "two_sample_ks")
BUFFER_POLICIES = ("fill_then_evaluate", "sliding_window")


@dataclass(frozen=True)
class TriggerVerdict:
    """Outcome of one trigger evaluation."""

    fired: bool
    statistic: float
    kappa: float
    kind: str

    def __post_init__(self):
        if self.kind not in VALID_KINDS:
            raise ValueError(f"kind must be one of {VALID_KINDS}")


class TriggerBuffer:
    """Bounded collection of observed stopping times awaiting evaluation.

    fill_then_evaluate (default): the buffer is evaluated once full and must
    be cleared after every evaluation, so evaluations see disjoint blocks and
    the per-evaluation alpha guarantee applies. sliding_window: once full,
    each push evicts the oldest entry and the buffer is ready on every push;
    faster detection, but overlapping windows void the alpha guarantee.
    """

    def __init__(self, capacity: int, policy: str = "fill_then_evaluate"):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if policy not in BUFFER_POLICIES:
            raise ValueError(f"policy must be one of {BUFFER_POLICIES}")
        self.capacity = int(capacity)
        self.policy = policy
        self._values: list[float] = []
        self._censored: list[bool] = []

    def __len__(self) -> int:
        return len(self._values)

    def push(self, value: float, censored: bool = False) -> None:
        if len(self._values) >= self.capacity:
            if self.policy == "fill_then_evaluate":
                raise ValueError("buffer full; evaluate and clear before pushing")
            self._values.pop(0)
            self._censored.pop(0)
        self._values.append(float(value))
        self._censored.append(bool(censored))

    @property
    def is_full(self) -> bool:
        return len(self._values) == self.capacity

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self._values)

    @property
    def censored(self) -> np.ndarray:
        return np.asarray(self._censored, dtype=bool)

    def clear(self) -> None:
        self._values.clear()
        self._censored.clear()


def _check_domain(alpha: float, sizes: dict[str, int], tau_max: float | None = None) -> None:
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    for name, size in sizes.items():
        if size < 1:
            raise ValueError(f"{name} must be >= 1")
    if tau_max is not None and tau_max <= 0:
        raise ValueError("tau_max must be positive")


def kappa_exact_mean(alpha: float, n: int, tau_max: float) -> float:
    """Hoeffding radius for |empirical mean - true mean| on [0, tau_max] samples."""
    _check_domain(alpha, {"n": n}, tau_max)
    return tau_max * math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


def kappa_approx_mean(alpha: float, n: int, m: int, tau_max: float) -> float:
    """Two-sample Hoeffding radius; converges to kappa_exact_mean as m grows."""
    _check_domain(alpha, {"n": n, "m": m}, tau_max)
    return tau_max * math.sqrt((n + m) / (2.0 * n * m) * math.log(2.0 / alpha))


def kappa_exact_cdf(alpha: float, n: int) -> float:
    """DKW radius for the sup-distance between F_n and the true CDF."""
    _check_domain(alpha, {"n": n})
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


def kappa_ks(alpha: float, n: int, m: int) -> float:
    """Two-sample DKW-type radius for the KS statistic."""
    _check_domain(alpha, {"n": n, "m": m})
    return math.sqrt((n + m) / (2.0 * n * m) * math.log(2.0 / alpha))


def _values_of(sample, name: str) -> np.ndarray:
    # accepts a TriggerBuffer, a StoppingSample, or any 1-d array-like
    if isinstance(sample, (TriggerBuffer, StoppingSample)):
        values = np.asarray(sample.values, dtype=float)
    else:
        values = np.asarray(sample, dtype=float)
    if values.ndim != 1 or len(values) == 0:
        raise ValueError(f"{name} must be a nonempty 1-d sample")
    return values


def _check_declared(actual: int, declared: int | None, name: str) -> int:
    if declared is not None and actual != declared:
        raise ValueError(f"{name}: got {actual} entries, declared {declared}")
    return actual


def exact_mean_trigger(
    buffer, expected_tau: float, alpha: float, tau_max: float, n: int | None = None
) -> TriggerVerdict:
    """Fire when |mean(buffer) - expected_tau| >= kappa_exact_mean.

    ``expected_tau`` must be supplied externally (analytic value or a
    high-sample-count Monte Carlo surrogate).
    """
    values = _values_of(buffer, "buffer")
    size = _check_declared(len(values), n, "buffer")
    kappa = kappa_exact_mean(alpha, size, tau_max)
    statistic = abs(float(np.mean(values)) - expected_tau)
    return TriggerVerdict(statistic >= kappa, statistic, kappa, "exact_mean")


def approx_mean_trigger(
    empirical,
    model_based,
    alpha: float,
    tau_max: float,
    n: int | None = None,
    m: int | None = None,
) -> TriggerVerdict:
    """Fire when the empirical and model-based sample means differ by >= kappa_approx_mean."""
    emp = _values_of(empirical, "empirical sample")
    ref = _values_of(model_based, "model-based sample")
    size_n = _check_declared(len(emp), n, "empirical sample")
    size_m = _check_declared(len(ref), m, "model-based sample")
    kappa = kappa_approx_mean(alpha, size_n, size_m, tau_max)
    statistic = abs(float(np.mean(emp)) - float(np.mean(ref)))
    return TriggerVerdict(statistic >= kappa, statistic, kappa, "approx_mean")


def exact_cdf_trigger(buffer, analytic_cdf, alpha: float, n: int | None = None) -> TriggerVerdict:
    """Fire when sup_t |F(t) - F_n(t)| > kappa_exact_cdf against a known CDF.

    The sup of a step function against a nondecreasing F is attained at a
    sample point from one side or the other, so both one-sided gaps are
    evaluated at every distinct sample value (the left limit via the nearest
    smaller float). Distinct values, not sorted copies: with tied samples the
    textbook rank formula pairs F's right value at an atom with empirical
    ranks interior to the jump, which inflates the statistic.
    """
    raw = _values_of(buffer, "buffer")
    size = _check_declared(len(raw), n, "buffer")
    uniq, counts = np.unique(np.asarray(raw, dtype=float), return_counts=True)
    emp_right = np.cumsum(counts) / size
    emp_left = emp_right - counts / size
    at_points = np.asarray(analytic_cdf(uniq), dtype=float)
    before_points = np.asarray(analytic_cdf(np.nextafter(uniq, -np.inf)), dtype=float)
    for evaluated in (at_points, before_points):
        if evaluated.shape != uniq.shape or np.any(evaluated < 0) or np.any(evaluated > 1):
            raise ValueError("analytic_cdf must map sample values into [0, 1]")
    if np.any(np.diff(at_points) < -1e-12):
        raise ValueError("analytic_cdf must be nondecreasing")
    statistic = float(
        max(np.max(np.abs(at_points - emp_right)), np.max(np.abs(before_points - emp_left)))
    )
    kappa = kappa_exact_cdf(alpha, size)
    return TriggerVerdict(statistic > kappa, statistic, kappa, "exact_cdf")


def ks_statistic(first, second) -> float:
    """Exact two-sample KS sup-distance, correct in the presence of ties.

    Evaluated on the merged sorted support with right-continuous counts;
    between support points both empirical CDFs are constant, so the sup over
    all t is attained at a support point. With both samples capped at a
    shared tau_max the value also equals the sup restricted to t < tau_max.
    """
    x = np.sort(_values_of(first, "first sample"))
    y = np.sort(_values_of(second, "second sample"))
    support = np.union1d(x, y)
    f_x = np.searchsorted(x, support, side="right") / len(x)
    f_y = np.searchsorted(y, support, side="right") / len(y)
    return float(np.max(np.abs(f_x - f_y)))


def ks_trigger(
    empirical, model_based, alpha: float, n: int | None = None, m: int | None = None
) -> TriggerVerdict:
    """Fire when the two-sample KS statistic exceeds kappa_ks (strict >)."""
    emp = _values_of(empirical, "empirical sample")
    ref = _values_of(model_based, "model-based sample")
    size_n = _check_declared(len(emp), n, "empirical sample")
    size_m = _check_declared(len(ref), m, "model-based sample")
    statistic = ks_statistic(emp, ref)
    kappa = kappa_ks(alpha, size_n, size_m)
    return TriggerVerdict(statistic > kappa, statistic, kappa, "two_sample_ks")
