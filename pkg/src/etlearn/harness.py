"""Experiment orchestration: config loading, the closed learning loop, presets.

The loop wires the pieces together: the plant is simulated, the state trigger
governs communication, observed inter-communication times fill a buffer, a
learning trigger compares the buffer against the model's predictions, and a
fired verdict causes relearning (oracle parameter copy or a dedicated
least-squares episode), a predictor update, a fresh Monte Carlo reference
sample, and a buffer clear. Everything is logged to an event stream.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .etse import TriggerConfig, CommunicationLog, state_trigger
from .kalman import (
    OutputModel,
    collect_gaps_kf,
    kf_step,
    run_etse_kf,
    sample_stopping_times_kf,
    solve_dare,
)
from .etse import collect_gaps, intercomm_times, run_etse
from .linsys import DiscreteLinearModel, model_from_dict, step_discrete
from .stopping import StoppingSample, empirical_cdf, empirical_mean, sample_stopping_times
from .triggers import (
    BUFFER_POLICIES,
    TriggerBuffer,
    approx_mean_trigger,
    exact_mean_trigger,
    kappa_approx_mean,
    kappa_exact_mean,
    kappa_ks,
    ks_trigger,
)
from .sysid import identify_discrete, learning_episode, UnstableEstimateError


class ConfigError(ValueError):
    """Experiment configuration is missing, malformed, or inconsistent."""


MODES = ("full_state", "kalman")
LEARNING_MODES = ("oracle", "least_squares")
CONFIG_TRIGGER_KINDS = ("exact_mean", "approx_mean", "two_sample_ks")
FIGURE_IDS = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8")


@dataclass
class ExperimentConfig:
    mode: str
    plant: object
    model: object
    trigger: TriggerConfig
    trigger_kind: str = "approx_mean"
    buffer_policy: str = "fill_then_evaluate"
    learning: str = "oracle"
    steps: int = 10_000
    seed: int = 0
    burn_in: int = 1000
    episode_length: int = 5000
    expected_tau: float | None = None
    workers: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.trigger_kind not in CONFIG_TRIGGER_KINDS:
            raise ConfigError(
                f"trigger_kind must be one of {CONFIG_TRIGKINDS_MSG}; "
                "the exact_cdf trigger needs a callable reference CDF and is "
                "available through the API only"
            )
        if self.buffer_policy not in BUFFER_POLICIES:
            raise ConfigError(f"buffer_policy must be one of {BUFFER_POLICIES}")
        if self.learning not in LEARNING_MODES:
            raise ConfigError(f"learning must be one of {LEARNING_MODES}")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.burn_in < 0:
            raise ConfigError("burn_in must be >= 0")
        if self.trigger_kind == "exact_mean" and self.expected_tau is None:
            raise ConfigError("trigger_kind exact_mean requires expected_tau")
        expected_type = OutputModel if self.mode == "kalman" else DiscreteLinearModel
        for name, model in (("plant", self.plant), ("model", self.model)):
            if not isinstance(model, expected_type):
                raise ConfigError(f"{name} spec does not match mode {self.mode}")
        dim = lambda m: m.state_dim if isinstance(m, OutputModel) else m.dim
        if dim(self.plant) != dim(self.model):
            raise ConfigError("plant and model dimensions disagree")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {
            "mode",
            "plant",
            "model",
            "trigger",
            "trigger_kind",
            "buffer_policy",
            "learning",
            "steps",
            "seed",
            "burn_in",
            "episode_length",
            "expected_tau",
            "workers",
        }
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            mode = doc["mode"]
            plant_doc = doc["plant"]
            model_doc = doc["model"]
            trigger_doc = doc["trigger"]
        except KeyError as exc:
            raise ConfigError(f"missing config key: {exc.args[0]}") from None
        try:
            if mode == "kalman":
                plant = OutputModel.from_dict(plant_doc)
                model = OutputModel.from_dict(model_doc)
            else:
                plant = model_from_dict(plant_doc)
                model = model_from_dict(model_doc)
            trigger = TriggerConfig(
                delta=float(trigger_doc["delta"]),
                tau_max=int(trigger_doc["tau_max"]),
                n=int(trigger_doc["n"]),
                m=int(trigger_doc["m"]),
                alpha=float(trigger_doc["alpha"]),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid model or trigger spec: {exc}") from None
        kwargs = {
            key: doc[key]
            for key in known - {"mode", "plant", "model", "trigger"}
            if key in doc
        }
        return cls(mode=mode, plant=plant, model=model, trigger=trigger, **kwargs)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a JSON object")
        return cls.from_dict(doc)


CONFIG_TRIGKINDS_MSG = ", ".join(CONFIG_TRIGGER_KINDS)


@dataclass
class EventStream:
    """Ordered run records: events, buffer verdicts, model updates."""

    records: list[dict] = field(default_factory=list)

    def append(self, kind: str, step: int, **payload) -> None:
        if self.records and step < self.records[-1]["step"]:
            raise ValueError("event stream steps must be nondecreasing")
        if kind == "model_update" and not self._pending_fired_verdict():
            raise ValueError("model_update must follow a fired verdict")
        self.records.append({"kind": kind, "step": int(step), **payload})

    def _pending_fired_verdict(self) -> bool:
        for record in reversed(self.records):
            if record["kind"] == "model_update":
                return False
            if record["kind"] == "verdict":
                return bool(record.get("fired"))
        return False

    def of_kind(self, kind: str) -> list[dict]:
        return [r for r in self.records if r["kind"] == kind]

    def to_csv(self, path) -> None:
        keys: list[str] = ["step", "kind"]
        for record in self.records:
            for key in record:
                if key not in keys:
                    keys.append(key)
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=keys, restval="")
            writer.writeheader()
            writer.writerows(self.records)


def _model_dim(model) -> int:
    return model.state_dim if isinstance(model, OutputModel) else model.dim


def _sample_reference(model, trig: TriggerConfig, rng, workers) -> StoppingSample:
    if isinstance(model, OutputModel):
        return sample_stopping_times_kf(model, trig.delta, trig.tau_max, trig.m, rng, workers)
    return sample_stopping_times(model, trig.delta, trig.tau_max, trig.m, rng, workers)


def _evaluate_trigger(cfg: ExperimentConfig, buffer: TriggerBuffer, reference):
    values = buffer.values
    trig = cfg.trigger
    if cfg.trigger_kind == "approx_mean":
        return approx_mean_trigger(values, reference, trig.alpha, trig.tau_max, m=trig.m)
    if cfg.trigger_kind == "two_sample_ks":
        return ks_trigger(values, reference, trig.alpha, m=trig.m)
    return exact_mean_trigger(values, cfg.expected_tau, trig.alpha, trig.tau_max)


def _learn(cfg: ExperimentConfig, learn_rng):
    """Return (new_filter_model_or_None, new_predictor_reference_model)."""
    if cfg.learning == "oracle":
        if cfg.mode == "kalman":
            return cfg.plant, cfg.plant
        fresh = DiscreteLinearModel(
            cfg.plant.transition,
            cfg.plant.noise_cov,
            allow_degenerate=cfg.plant.allow_degenerate,
            allow_marginal=cfg.plant.allow_marginal,
        )
        return None, fresh
    length = cfg.episode_length
    for attempt in range(3):
        try:
            if cfg.mode == "kalman":
                dataset = _filter_state_episode(cfg.plant, cfg.model, length, learn_rng)
            else:
                dataset = learning_episode(cfg.plant, length, learn_rng)
            return None, identify_discrete(dataset)
        except UnstableEstimateError:
            if attempt == 2:
                raise
            length *= 2  # refused estimate: extend the episode and retry


def _filter_state_episode(plant: OutputModel, model: OutputModel, length: int, rng):
    # Full-rate episode recording the sender's filter states; fits the
    # filter-state recursion (A, K S K^T), which is exactly what the
    # predictor and the reference sampler consume.
    from .sysid import LearningDataset

    filt = solve_dare(model)
    x = np.zeros(plant.state_dim)
    xhat = np.zeros(plant.state_dim)
    states = np.empty((length + 1, plant.state_dim))
    states[0] = xhat
    for k in range(1, length + 1):
        x = plant.A @ x + plant.state_noise_factor @ rng.standard_normal(plant.state_dim)
        y = plant.C @ x + plant.obs_noise_factor @ rng.standard_normal(plant.obs_dim)
        xhat = kf_step(filt, model, xhat, y)
        states[k] = xhat
    return LearningDataset(states)


def run_experiment(
    cfg: ExperimentConfig, out_dir=None, running_stats: bool = False
) -> EventStream:
    """Execute the closed event-triggered learning loop.

    Returns the event stream; when ``out_dir`` is given, also writes
    trajectory.csv, gaps.csv, events.csv, optionally running_mean.csv, and
    manifest.json there.
    """
    root = np.random.default_rng(cfg.seed)
    sim_rng, mc_rng, learn_rng = root.spawn(3)
    trig = cfg.trigger
    kalman_mode = cfg.mode == "kalman"
    plant = cfg.plant
    dim = _model_dim(plant)

    kf_model = cfg.model if kalman_mode else None
    filt = solve_dare(kf_model) if kalman_mode else None
    reference_model = cfg.model
    pred_trans = cfg.model.A if kalman_mode else cfg.model.transition

    x = np.zeros(dim)
    xhat = np.zeros(dim) if kalman_mode else None
    if kalman_mode:
        for _ in range(cfg.burn_in):
            x = plant.A @ x + plant.state_noise_factor @ sim_rng.standard_normal(dim)
            y = plant.C @ x + plant.obs_noise_factor @ sim_rng.standard_normal(plant.obs_dim)
            xhat = kf_step(filt, kf_model, xhat, y)
    sender = xhat if kalman_mode else x
    x_pred = sender.copy()

    buffer = TriggerBuffer(trig.n, cfg.buffer_policy)
    needs_reference = cfg.trigger_kind != "exact_mean"
    reference = (
        _sample_reference(reference_model, trig, mc_rng, cfg.workers)
        if needs_reference
        else None
    )
    stream = EventStream()
    log = CommunicationLog()
    running_rows = []
    updates = []

    states = np.empty((cfg.steps + 1, dim))
    estimates = np.empty((cfg.steps + 1, dim)) if kalman_mode else None
    predictions = np.empty((cfg.steps + 1, dim))
    states[0] = x
    predictions[0] = x_pred
    if kalman_mode:
        estimates[0] = xhat

    learning_transmissions = 0
    since = 0
    for k in range(1, cfg.steps + 1):
        if kalman_mode:
            x = plant.A @ x + plant.state_noise_factor @ sim_rng.standard_normal(dim)
            y = plant.C @ x + plant.obs_noise_factor @ sim_rng.standard_normal(plant.obs_dim)
            xhat = kf_step(filt, kf_model, xhat, y)
            sender = xhat
        else:
            x = step_discrete(plant, x, sim_rng)
            sender = x
        x_pred = pred_trans @ x_pred
        since += 1
        crossed = state_trigger(sender, x_pred, trig.delta)
        if crossed or since >= trig.tau_max:
            censored = not crossed
            log.record(k, censored=censored)
            stream.append("event", k, value=since, censored=censored)
            buffer.push(since, censored=censored)
            x_pred = sender.copy()
            since = 0
            if running_stats:
                size = len(buffer)
                ref_mean = (
                    float(np.mean(reference.values)) if reference is not None else cfg.expected_tau
                )
                radius = (
                    kappa_approx_mean(trig.alpha, size, trig.m, trig.tau_max)
                    if needs_reference
                    else kappa_exact_mean(trig.alpha, size, trig.tau_max)
                )
                running_rows.append(
                    {
                        "step": k,
                        "buffer_mean": float(np.mean(buffer.values)),
                        "reference_mean": ref_mean,
                        "band_low": ref_mean - radius,
                        "band_high": ref_mean + radius,
                    }
                )
            if buffer.is_full:
                verdict = _evaluate_trigger(cfg, buffer, reference)
                stream.append(
                    "verdict",
                    k,
                    trigger_kind=verdict.kind,
                    statistic=verdict.statistic,
                    kappa=verdict.kappa,
                    fired=verdict.fired,
                    buffer_size=len(buffer),
                    mc_size=trig.m if needs_reference else 0,
                    alpha=trig.alpha,
                )
                if verdict.fired:
                    new_filter_model, new_reference_model = _learn(cfg, learn_rng)
                    if cfg.learning == "least_squares":
                        learning_transmissions += cfg.episode_length
                    if new_filter_model is not None:
                        kf_model = new_filter_model
                        filt = solve_dare(kf_model)
                    reference_model = new_reference_model
                    pred_trans = (
                        reference_model.A
                        if isinstance(reference_model, OutputModel)
                        else reference_model.transition
                    )
                    model_doc = reference_model.to_dict()
                    updates.append({"step": k, "model": model_doc})
                    stream.append("model_update", k, detail=json.dumps(model_doc))
                    buffer.clear()
                    if needs_reference:
                        reference = _sample_reference(reference_model, trig, mc_rng, cfg.workers)
                elif cfg.buffer_policy == "fill_then_evaluate":
                    buffer.clear()
        states[k] = x
        predictions[k] = x_pred
        if kalman_mode:
            estimates[k] = xhat

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_trajectory_csv(out / "trajectory.csv", states, estimates, predictions, log)
        if len(log):
            intercomm_times(log).to_csv(out / "gaps.csv")
        stream.to_csv(out / "events.csv")
        if running_stats:
            _write_rows_csv(
                out / "running_mean.csv",
                ["step", "buffer_mean", "reference_mean", "band_low", "band_high"],
                running_rows,
            )
        manifest = _experiment_manifest(cfg, stream, log, updates, learning_transmissions)
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return stream


def _experiment_manifest(cfg, stream, log, updates, learning_transmissions):
    trig = cfg.trigger
    verdicts = stream.of_kind("verdict")
    dim = _model_dim(cfg.plant)
    manifest = {
        "mode": cfg.mode,
        "seed": cfg.seed,
        "steps": cfg.steps,
        "trigger_kind": cfg.trigger_kind,
        "buffer_policy": cfg.buffer_policy,
        "learning": cfg.learning,
        "trigger": {
            "delta": trig.delta,
            "tau_max": trig.tau_max,
            "n": trig.n,
            "m": trig.m,
            "alpha": trig.alpha,
        },
        "kappa": {
            "exact_mean": kappa_exact_mean(trig.alpha, trig.n, trig.tau_max),
            "approx_mean": kappa_approx_mean(trig.alpha, trig.n, trig.m, trig.tau_max),
            "two_sample_ks": kappa_ks(trig.alpha, trig.n, trig.m),
        },
        "plant": cfg.plant.to_dict(),
        "initial_model": cfg.model.to_dict(),
        "verdicts": [
            {key: record[key] for key in ("step", "trigger_kind", "statistic", "kappa", "fired")}
            for record in verdicts
        ],
        "model_updates": updates,
        "accounting": {
            "events": len(log),
            "forced_events": int(sum(log.censored_flags)),
            "state_transmissions": len(log),
            "learning_transmissions": learning_transmissions,
            "model_messages": len(updates),
            "values_per_model_message": 2 * dim * dim,
        },
    }
    return manifest


def _write_trajectory_csv(path, states, estimates, predictions, log: CommunicationLog):
    dim = states.shape[1]
    header = ["step"] + [f"x{i}" for i in range(dim)]
    if estimates is not None:
        header += [f"x_hat{i}" for i in range(dim)]
    header += [f"x_pred{i}" for i in range(dim)] + ["event"]
    event_steps = set(log.event_steps)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for step in range(len(states)):
            row = [step] + states[step].tolist()
            if estimates is not None:
                row += estimates[step].tolist()
            row += predictions[step].tolist() + [int(step in event_steps)]
            writer.writerow(row)


def _write_rows_csv(path, fieldnames, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)


# --- scenario presets -------------------------------------------------------

SCALAR_PLANT_DOC = {"dim": 1, "A": [[0.9]], "Q": [[1.0]]}
SCALAR_MODEL_DOC = {"dim": 1, "A": [[0.8]], "Q": [[1.0]]}
COUNTEREXAMPLE_MODEL_DOC = {"dim": 1, "A": [[0.5]], "Q": [[2.89]]}

PENDULUM_A = [
    [1.000, 0.010, -0.005, 0.000],
    [0.017, 1.027, -0.301, -0.061],
    [0.000, 0.000, 0.997, 0.009],
    [0.046, 0.067, -0.507, 0.850],
]
PENDULUM_C = [[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]]
PENDULUM_Q_SCALE = 0.01
PENDULUM_R_SCALE = 0.01
PENDULUM_R_MODEL_SCALE = 0.25
PENDULUM_R_POOR_SCALE = 100.0


def pendulum_model(r_scale: float = PENDULUM_R_SCALE) -> OutputModel:
    """The 4-state demo plant; ``r_scale`` sets the measurement covariance scale."""
    return OutputModel(
        np.asarray(PENDULUM_A),
        np.asarray(PENDULUM_C),
        PENDULUM_Q_SCALE * np.eye(4),
        r_scale * np.eye(2),
    )


DEFAULT_FIGURE_SEEDS = {
    "fig2": 1,
    "fig3": 0,
    "fig4": 0,
    "fig5": 0,
    "fig6": 0,
    "fig7": 0,
    "fig8": 0,
}


def scenario_config(seed: int = 0, steps: int = 20_000, **overrides) -> ExperimentConfig:
    """The scalar mismatch scenario: plant (0.9, 1), model (0.8, 1), delta 3."""
    kwargs = {
        "mode": "full_state",
        "plant": model_from_dict(SCALAR_PLANT_DOC),
        "model": model_from_dict(SCALAR_MODEL_DOC),
        "trigger": TriggerConfig(delta=3.0, tau_max=100, n=300, m=100_000, alpha=0.05),
        "trigger_kind": "approx_mean",
        "learning": "oracle",
        "steps": steps,
        "seed": seed,
    }
    kwargs.update(overrides)
    return ExperimentConfig(**kwargs)


def _figure_out_dir(out_dir, figure_id) -> Path:
    out = Path(out_dir) if out_dir is not None else Path(f"{figure_id}_data")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, manifest: dict) -> dict:
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return manifest


def _verdict_doc(verdict) -> dict:
    return {
        "kind": verdict.kind,
        "statistic": verdict.statistic,
        "kappa": verdict.kappa,
        "fired": verdict.fired,
    }


def reproduce(figure_id: str, out_dir=None, seed: int | None = None, workers: int | None = None) -> dict:
    """Write the CSV data bundle behind one of the named result figures.

    Returns the manifest (also written as manifest.json in the output
    directory). Unknown figure ids raise ConfigError.
    """
    if figure_id not in FIGURE_IDS:
        raise ConfigError(f"unknown figure id {figure_id!r}; choose from {FIGURE_IDS}")
    if seed is None:
        seed = DEFAULT_FIGURE_SEEDS[figure_id]
    out = _figure_out_dir(out_dir, figure_id)
    builder = {
        "fig2": _reproduce_fig2,
        "fig3": _reproduce_fig3,
        "fig4": lambda o, s, w: _reproduce_cdf_pair(o, s, w, "fig4", SCALAR_MODEL_DOC, 300, 100_000),
        "fig5": lambda o, s, w: _reproduce_cdf_pair(o, s, w, "fig5", SCALAR_PLANT_DOC, 300, 100_000),
        "fig6": lambda o, s, w: _reproduce_cdf_pair(o, s, w, "fig6", COUNTEREXAMPLE_MODEL_DOC, 10_000, 10_000),
        "fig7": _reproduce_fig7,
        "fig8": _reproduce_fig8,
    }[figure_id]
    return builder(out, seed, workers)


def _reproduce_fig2(out: Path, seed: int, workers) -> dict:
    plant = model_from_dict(SCALAR_PLANT_DOC)
    model = model_from_dict(SCALAR_MODEL_DOC)
    cfg = TriggerConfig(delta=3.0, tau_max=100, n=300, m=1000, alpha=0.05)
    steps = 400
    while True:
        trajectory, predictions, log = run_etse(
            plant, model, cfg, steps, np.random.default_rng(seed)
        )
        if len(log) >= 10 or steps >= 6400:
            break
        steps *= 2
    cutoff = log.event_steps[9] if len(log) >= 10 else log.event_steps[-1]
    keep = cutoff + 1
    truncated_log = CommunicationLog(
        [s for s in log.event_steps if s <= cutoff],
        [c for s, c in zip(log.event_steps, log.censored_flags) if s <= cutoff],
    )
    trimmed = type(trajectory)(trajectory.times[:keep], trajectory.states[:keep])
    trimmed_pred = type(predictions)(predictions.times[:keep], predictions.states[:keep])
    from .etse import write_run_csv

    write_run_csv(out / "trajectory.csv", trimmed, trimmed_pred, truncated_log)
    errors = np.linalg.norm(trajectory.states[:keep] - predictions.states[:keep], axis=1)
    _write_rows_csv(
        out / "error.csv",
        ["step", "error_norm", "delta"],
        [
            {"step": k, "error_norm": float(errors[k]), "delta": cfg.delta}
            for k in range(keep)
        ],
    )
    gaps = intercomm_times(truncated_log)
    manifest = {
        "figure": "fig2",
        "seed": seed,
        "delta": cfg.delta,
        "tau_max": cfg.tau_max,
        "plant": plant.to_dict(),
        "model": model.to_dict(),
        "event_steps": truncated_log.event_steps,
        "gaps": gaps.values.tolist(),
        "max_error_between_events": float(
            max(
                (e for k, e in enumerate(errors) if k not in set(truncated_log.event_steps)),
                default=0.0,
            )
        ),
    }
    return _write_manifest(out, manifest)


def _reproduce_fig3(out: Path, seed: int, workers) -> dict:
    cfg = scenario_config(seed=seed, workers=workers)
    stream = run_experiment(cfg, out_dir=out, running_stats=True)
    verdicts = stream.of_kind("verdict")
    updates = stream.of_kind("model_update")
    manifest = json.loads((out / "manifest.json").read_text())
    manifest.update(
        {
            "figure": "fig3",
            "first_fire_step": next((v["step"] for v in verdicts if v["fired"]), None),
            "update_steps": [u["step"] for u in updates],
            "post_update_fires": sum(
                1 for v in verdicts if updates and v["step"] > updates[0]["step"] and v["fired"]
            ),
        }
    )
    return _write_manifest(out, manifest)


def _reproduce_cdf_pair(out: Path, seed: int, workers, figure: str, model_doc: dict, n: int, m: int) -> dict:
    plant = model_from_dict(SCALAR_PLANT_DOC)
    model = model_from_dict(model_doc)
    delta, tau_max, alpha = 3.0, 100, 0.05
    rng = np.random.default_rng(seed)
    gap_rng, mc_rng = rng.spawn(2)
    empirical = collect_gaps(plant, model, delta, tau_max, n, gap_rng)
    reference = sample_stopping_times(model, delta, tau_max, m, mc_rng, workers)
    empirical_cdf(empirical).to_csv(out / "cdf_empirical.csv")
    empirical_cdf(reference).to_csv(out / "cdf_model.csv")
    mean_verdict = approx_mean_trigger(empirical, reference, alpha, tau_max)
    ks_verdict = ks_trigger(empirical, reference, alpha)
    manifest = {
        "figure": figure,
        "seed": seed,
        "delta": delta,
        "tau_max": tau_max,
        "alpha": alpha,
        "n": n,
        "m": m,
        "plant": plant.to_dict(),
        "model": model.to_dict(),
        "empirical_mean": empirical_mean(empirical),
        "model_mean": empirical_mean(reference),
        "mean_trigger": _verdict_doc(mean_verdict),
        "ks_trigger": _verdict_doc(ks_verdict),
    }
    return _write_manifest(out, manifest)


def _reproduce_fig7(out: Path, seed: int, workers) -> dict:
    plant = pendulum_model()
    delta, tau_max, n, m, alpha = 1.0, 100, 5000, 5000, 0.05
    manifest = {
        "figure": "fig7",
        "seed": seed,
        "delta": delta,
        "tau_max": tau_max,
        "n": n,
        "m": m,
        "alpha": alpha,
        "plant": plant.to_dict(),
    }
    rng = np.random.default_rng(seed)
    means = {}
    for label, r_scale in (("mismatch", PENDULUM_R_MODEL_SCALE), ("corrected", PENDULUM_R_SCALE)):
        model = pendulum_model(r_scale)
        gap_rng, mc_rng = rng.spawn(2)
        empirical = collect_gaps_kf(plant, model, delta, tau_max, n, gap_rng)
        reference = sample_stopping_times_kf(model, delta, tau_max, m, mc_rng, workers)
        empirical_cdf(empirical).to_csv(out / f"cdf_empirical_{label}.csv")
        empirical_cdf(reference).to_csv(out / f"cdf_model_{label}.csv")
        means[label] = empirical_mean(empirical)
        manifest[label] = {
            "model_r_scale": r_scale,
            "empirical_mean": empirical_mean(empirical),
            "model_mean": empirical_mean(reference),
            "mean_trigger": _verdict_doc(approx_mean_trigger(empirical, reference, alpha, tau_max)),
            "ks_trigger": _verdict_doc(ks_trigger(empirical, reference, alpha)),
        }
    manifest["mean_decreased_after_correction"] = means["corrected"] < means["mismatch"]
    return _write_manifest(out, manifest)


def _reproduce_fig8(out: Path, seed: int, workers) -> dict:
    plant = pendulum_model()
    cfg = TriggerConfig(delta=1.0, tau_max=100, n=300, m=1000, alpha=0.05)
    qualities = (
        ("matched", PENDULUM_R_SCALE),
        ("degraded", PENDULUM_R_MODEL_SCALE),
        ("poor", PENDULUM_R_POOR_SCALE),
    )
    counts = {}
    manifest = {
        "figure": "fig8",
        "seed": seed,
        "delta": cfg.delta,
        "tau_max": cfg.tau_max,
        "steps": 150,
        "plant": plant.to_dict(),
        "runs": {},
    }
    for label, r_scale in qualities:
        model = pendulum_model(r_scale)
        trajectory, estimates, predictions, log = run_etse_kf(
            plant, model, cfg, steps=150, burn_in=0, rng=np.random.default_rng(seed)
        )
        _write_trajectory_csv(
            out / f"trajectory_{label}.csv",
            trajectory.states,
            estimates.states,
            predictions.states,
            log,
        )
        counts[label] = len(log)
        manifest["runs"][label] = {
            "model_r_scale": r_scale,
            "events": len(log),
            "event_steps": log.event_steps,
        }
    manifest["events_decrease_with_model_quality"] = (
        counts["matched"] > counts["degraded"] > counts["poor"]
    )
    return _write_manifest(out, manifest)


def sample_tau_summary(
    model_doc: dict,
    delta: float,
    tau_max: int,
    m: int,
    seed: int,
    workers: int | None = None,
    out_dir=None,
) -> dict:
    """Standalone stopping-time sampling with summary statistics (CLI backend)."""
    rng = np.random.default_rng(seed)
    if "C" in model_doc:
        model = OutputModel.from_dict(model_doc)
        sample = sample_stopping_times_kf(model, delta, tau_max, m, rng, workers)
    else:
        model = model_from_dict(model_doc)
        if not isinstance(model, DiscreteLinearModel):
            raise ConfigError("sample-tau needs a discrete model document")
        sample = sample_stopping_times(model, delta, tau_max, m, rng, workers)
    values = np.asarray(sample.values, dtype=float)
    std = float(np.std(values, ddof=1)) if m > 1 else 0.0
    summary = {
        "delta": delta,
        "tau_max": int(tau_max),
        "m": int(m),
        "seed": int(seed),
        "mean": float(np.mean(values)),
        "std": std,
        "standard_error": std / float(np.sqrt(m)),
        "censored_fraction": float(np.mean(sample.censored)),
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        sample.to_csv(out / "sample.csv")
        empirical_cdf(sample).to_csv(out / "cdf.csv")
        (out / "summary.json").write_text(json.dumps(summary, indent=2))
    return summary
