"""Synthetic session generator and the timestamp-noise injector.

Sessions are built in two steps so that every noise setting can reuse one
ground-truth draw: ``gen_sessions`` produces fully labeled sessions with no
events, and ``inject_noise`` replaces a session's event list with noisy
emissions derived from its labels.  Labels follow a two-state Markov chain
(geometric run lengths, so positives arrive in bursts) and features come
from class-conditional unit-variance Gaussians whose means sit
``class_separation`` apart.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, Session

__all__ = [
    "GenConfig",
    "NoiseConfig",
    "coupled_noise",
    "gen_sessions",
    "inject_noise",
    "inject_noise_dataset",
]

SPACING_MODES = ("fixed", "exponential")


@dataclass(frozen=True)
class GenConfig:
    """Ground-truth generator settings.

    ``instance_spacing`` is the mean gap between consecutive instance
    times; ``spacing`` selects a fixed grid or i.i.d. exponential gaps.
    ``burst_length`` is the mean run length of consecutive positives.
    """

    sessions: int = 10
    instances_per_session: tuple[int, int] = (200, 300)
    instance_spacing: float = 1.0
    positive_rate: float = 0.1
    feature_dim: int = 2
    class_separation: float = 3.0
    burst_length: float = 4.0
    spacing: str = "fixed"
    seed: int = 0

    def __post_init__(self) -> None:
        lo, hi = self.instances_per_session
        if self.sessions < 1:
            raise ValueError("sessions must be at least 1")
        if not (1 <= lo <= hi):
            raise ValueError("instances_per_session must satisfy 1 <= lo <= hi")
        if self.instance_spacing <= 0:
            raise ValueError("instance_spacing must be positive")
        if not 0.0 < self.positive_rate < 1.0:
            raise ValueError("positive_rate must lie strictly between 0 and 1")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be at least 1")
        if self.class_separation < 0:
            raise ValueError("class_separation must be nonnegative")
        if self.burst_length < 1:
            raise ValueError("burst_length must be at least 1")
        if self.spacing not in SPACING_MODES:
            raise ValueError(f"spacing must be one of {SPACING_MODES}")
        # Detailed balance: rate * p(exit) = (1 - rate) * p(enter).  The
        # entry probability must be a probability, which bounds how short
        # bursts can be at a given positive rate.
        if self._enter_prob() > 1.0:
            raise ValueError(
                "positive_rate and burst_length are inconsistent: the implied "
                "burst entry probability exceeds 1"
            )

    def _enter_prob(self) -> float:
        return self.positive_rate / (self.burst_length * (1.0 - self.positive_rate))


@dataclass(frozen=True)
class NoiseConfig:
    """Observation-noise settings for ``inject_noise``."""

    sigma: float = 1.0
    pi_pos: float = 0.9
    pi_neg: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        for name in ("pi_pos", "pi_neg"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


def coupled_noise(pi: float, sigma: float, seed: int = 0) -> NoiseConfig:
    """Single-parameter preset: a negative emits exactly when a positive
    would not, ``pi_neg = 1 - pi_pos``."""
    return NoiseConfig(sigma=sigma, pi_pos=pi, pi_neg=1.0 - pi, seed=seed)


def _markov_labels(rng: np.random.Generator, length: int, config: GenConfig) -> np.ndarray:
    exit_prob = 1.0 / config.burst_length
    enter_prob = config._enter_prob()
    draws = rng.random(length)
    labels = np.zeros(length, dtype=np.int64)
    # Stationary start, so the expected positive fraction is exact at every
    # position rather than only asymptotically.
    labels[0] = 1 if draws[0] < config.positive_rate else 0
    for i in range(1, length):
        if labels[i - 1] == 1:
            labels[i] = 0 if draws[i] < exit_prob else 1
        else:
            labels[i] = 1 if draws[i] < enter_prob else 0
    return labels


def _instance_times(rng: np.random.Generator, length: int, config: GenConfig) -> np.ndarray:
    if config.spacing == "fixed":
        return np.arange(length, dtype=np.float64) * config.instance_spacing
    gaps = rng.exponential(config.instance_spacing, size=length)
    # Exponential draws of exactly zero are vanishingly rare but would
    # violate strict ordering; nudge them.
    gaps = np.maximum(gaps, 1e-12 * config.instance_spacing)
    times = np.cumsum(gaps)
    return times - times[0]


def gen_sessions(config: GenConfig) -> Dataset:
    """Draw a labeled dataset with empty event lists, deterministically."""
    streams = np.random.SeedSequence(config.seed).spawn(config.sessions)
    lo, hi = config.instances_per_session
    shift = config.class_separation / np.sqrt(config.feature_dim)
    sessions = []
    for index, stream in enumerate(streams):
        rng = np.random.default_rng(stream)
        length = int(rng.integers(lo, hi + 1))
        times = _instance_times(rng, length, config)
        labels = _markov_labels(rng, length, config)
        features = rng.standard_normal((length, config.feature_dim))
        features[labels == 1] += shift
        sessions.append(
            Session(
                session_id=f"synth-{index:03d}",
                instance_times=times,
                features=features,
                event_times=np.empty(0, dtype=np.float64),
                true_labels=labels,
            )
        )
    return Dataset(tuple(sessions))


def inject_noise(
    session: Session, noise: NoiseConfig, rng: np.random.Generator | None = None
) -> Session:
    """Replace the session's events with noisy emissions from its labels.

    Each positive instance emits one mark with probability ``pi_pos`` and
    each negative with probability ``pi_neg``; an emitted mark lands at the
    instance time plus Gaussian(0, sigma^2) jitter.  Marks are sorted, so a
    large sigma can reorder emissions relative to their sources.
    """
    if not session.has_labels:
        raise ValueError(f"session {session.session_id!r} has no labels to emit from")
    if rng is None:
        rng = np.random.default_rng(noise.seed)
    emit_prob = np.where(session.true_labels == 1, noise.pi_pos, noise.pi_neg)
    emitted = rng.random(session.num_instances) < emit_prob
    count = int(emitted.sum())
    marks = session.instance_times[emitted] + rng.normal(0.0, noise.sigma, size=count)
    return session.with_events(np.sort(marks))


def inject_noise_dataset(data: Dataset, noise: NoiseConfig) -> Dataset:
    """Apply ``inject_noise`` per session with independent derived streams."""
    streams = np.random.SeedSequence(noise.seed).spawn(len(data))
    return Dataset(
        tuple(
            inject_noise(session, noise, np.random.default_rng(stream))
            for session, stream in zip(data, streams)
        )
    )
