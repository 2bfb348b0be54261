"""Linear Gaussian system models and their simulation primitives.

Continuous-time models are stable linear SDEs dx = drift*x dt + diffusion*dW;
discrete-time models are stable linear recursions x(k+1) = A x(k) + eps(k)
with eps ~ N(0, Q). Both are immutable after construction and safe to share
across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm


def _square_matrix(value, name: str) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    return arr


def _symmetric(mat: np.ndarray, name: str) -> np.ndarray:
    if not np.allclose(mat, mat.T, rtol=1e-9, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    return 0.5 * (mat + mat.T)


def _covariance_factor(cov: np.ndarray, name: str, allow_degenerate: bool) -> np.ndarray:
    """Return L with L @ L.T == cov, or raise if cov is not a covariance."""
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        if not allow_degenerate:
            raise ValueError(
                f"{name} is not positive definite; pass allow_degenerate=True "
                "for a singular covariance"
            ) from None
    vals, vecs = np.linalg.eigh(cov)
    scale = max(1.0, float(vals.max()))
    if float(vals.min()) < -1e-10 * scale:
        raise ValueError(f"{name} has negative eigenvalues")
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def spectral_radius(mat: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(mat))))


@dataclass(frozen=True)
class ContinuousLinearModel:
    """Stable linear SDE dx = drift @ x dt + diffusion @ dW.

    Parameters
    ----------
    drift : array_like
        Square matrix with all eigenvalue real parts strictly negative
        (marginally stable drift allowed only with ``allow_marginal``).
    diffusion : array_like
        Symmetric positive definite noise input matrix. The instantaneous
        noise covariance rate is ``diffusion @ diffusion.T``. Semidefinite
        matrices require ``allow_degenerate``.
    """

    drift: np.ndarray
    diffusion: np.ndarray
    allow_degenerate: bool = False
    allow_marginal: bool = False

    def __post_init__(self):
        drift = _square_matrix(self.drift, "drift")
        diffusion = _symmetric(_square_matrix(self.diffusion, "diffusion"), "diffusion")
        if diffusion.shape != drift.shape:
            raise ValueError("drift and diffusion dimensions disagree")
        max_real = float(np.max(np.real(np.linalg.eigvals(drift))))
        if max_real >= 0 and not self.allow_marginal:
            raise ValueError("drift must be Hurwitz (all eigenvalue real parts < 0)")
        min_eig = float(np.linalg.eigvalsh(diffusion).min())
        if min_eig <= 0 and not self.allow_degenerate:
            raise ValueError("diffusion must be positive definite")
        if min_eig < -1e-12:
            raise ValueError("diffusion has negative eigenvalues")
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "diffusion", diffusion)

    @property
    def dim(self) -> int:
        return self.drift.shape[0]

    def to_dict(self) -> dict:
        doc = {
            "dim": self.dim,
            "drift": self.drift.tolist(),
            "diffusion": self.diffusion.tolist(),
        }
        if self.allow_degenerate:
            doc["allow_degenerate"] = True
        if self.allow_marginal:
            doc["allow_marginal"] = True
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ContinuousLinearModel":
        model = cls(
            np.asarray(doc["drift"], dtype=float),
            np.asarray(doc["diffusion"], dtype=float),
            allow_degenerate=bool(doc.get("allow_degenerate", False)),
            allow_marginal=bool(doc.get("allow_marginal", False)),
        )
        if "dim" in doc and int(doc["dim"]) != model.dim:
            raise ValueError("declared dim does not match drift shape")
        return model


@dataclass(frozen=True)
class DiscreteLinearModel:
    """Stable linear recursion x(k+1) = transition @ x(k) + eps, eps ~ N(0, noise_cov).

    The Cholesky-type factor of ``noise_cov`` is computed once at
    construction and cached; sampling never refactorizes.
    """

    transition: np.ndarray
    noise_cov: np.ndarray
    allow_degenerate: bool = False
    allow_marginal: bool = False
    _noise_factor: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        transition = _square_matrix(self.transition, "transition")
        noise_cov = _symmetric(_square_matrix(self.noise_cov, "noise_cov"), "noise_cov")
        if noise_cov.shape != transition.shape:
            raise ValueError("transition and noise_cov dimensions disagree")
        rho = spectral_radius(transition)
        if rho >= 1 and not self.allow_marginal:
            raise ValueError(f"transition must have spectral radius < 1, got {rho:.6g}")
        factor = _covariance_factor(noise_cov, "noise_cov", self.allow_degenerate)
        object.__setattr__(self, "transition", transition)
        object.__setattr__(self, "noise_cov", noise_cov)
        object.__setattr__(self, "_noise_factor", factor)

    @property
    def dim(self) -> int:
        return self.transition.shape[0]

    @property
    def noise_factor(self) -> np.ndarray:
        """Factor L with L @ L.T == noise_cov."""
        return self._noise_factor

    @property
    def spectral_radius(self) -> float:
        return spectral_radius(self.transition)

    def to_dict(self) -> dict:
        doc = {
            "dim": self.dim,
            "A": self.transition.tolist(),
            "Q": self.noise_cov.tolist(),
        }
        if self.allow_degenerate:
            doc["allow_degenerate"] = True
        if self.allow_marginal:
            doc["allow_marginal"] = True
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "DiscreteLinearModel":
        model = cls(
            np.asarray(doc["A"], dtype=float),
            np.asarray(doc["Q"], dtype=float),
            allow_degenerate=bool(doc.get("allow_degenerate", False)),
            allow_marginal=bool(doc.get("allow_marginal", False)),
        )
        if "dim" in doc and int(doc["dim"]) != model.dim:
            raise ValueError("declared dim does not match A shape")
        return model


def model_from_dict(doc: dict):
    """Build a model from its serialized form, dispatching on the keys present."""
    if "A" in doc:
        return DiscreteLinearModel.from_dict(doc)
    if "drift" in doc:
        return ContinuousLinearModel.from_dict(doc)
    raise ValueError("model document needs either 'A'/'Q' or 'drift'/'diffusion' keys")


@dataclass
class Trajectory:
    """Time-indexed state sequence. ``states`` has one row per time point."""

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times)
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        if len(self.times) != len(self.states):
            raise ValueError("times and states lengths disagree")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)


def _check_state(state, dim: int) -> np.ndarray:
    arr = np.asarray(state, dtype=float)
    if arr.ndim == 0:
        arr = arr[None]
    if arr.shape[-1:] != (dim,):
        raise ValueError(f"state dimension {arr.shape} does not match model dim {dim}")
    return arr


def step_discrete(model: DiscreteLinearModel, state, rng: np.random.Generator) -> np.ndarray:
    """Advance the discrete model one step: A @ state + noise.

    ``state`` may be a single vector of shape (n,) or a batch of shape
    (..., n); one independent noise draw is made per vector.
    """
    arr = _check_state(state, model.dim)
    noise = rng.standard_normal(arr.shape) @ model.noise_factor.T
    return arr @ model.transition.T + noise


def step_euler_maruyama(
    model: ContinuousLinearModel, state, h: float, rng: np.random.Generator
) -> np.ndarray:
    """One Euler-Maruyama step of size ``h``.

    Returns state + drift @ state * h + sqrt(h) * diffusion @ xi with xi a
    standard normal vector. Batched states of shape (..., n) are supported.
    """
    if h <= 0:
        raise ValueError("step size h must be positive")
    arr = _check_state(state, model.dim)
    noise = rng.standard_normal(arr.shape) @ model.diffusion.T
    return arr + arr @ model.drift.T * h + np.sqrt(h) * noise


def discretize(model: ContinuousLinearModel, h: float) -> DiscreteLinearModel:
    """Exact zero-order discretization of a continuous model at step ``h``.

    Uses the augmented-matrix-exponential construction: the transition is
    exp(drift*h) and the noise covariance is the integral of
    exp(drift*s) @ diffusion @ diffusion.T @ exp(drift.T*s) over [0, h].
    """
    if h <= 0:
        raise ValueError("step size h must be positive")
    n = model.dim
    rate = model.diffusion @ model.diffusion.T
    block = np.zeros((2 * n, 2 * n))
    block[:n, :n] = -model.drift
    block[:n, n:] = rate
    block[n:, n:] = model.drift.T
    phi = expm(block * h)
    transition = phi[n:, n:].T
    noise_cov = transition @ phi[:n, n:]
    noise_cov = 0.5 * (noise_cov + noise_cov.T)
    return DiscreteLinearModel(
        transition,
        noise_cov,
        allow_degenerate=model.allow_degenerate,
        allow_marginal=model.allow_marginal,
    )
