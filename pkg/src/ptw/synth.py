"""Seeded synthetic sources.

All generators are pure functions of their arguments and ``seed``. Gaussian
draws go through one protocol (``mean + sd * standard_normal``) so a
single-component mixture reproduces :func:`gen_gaussian` exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np


@dataclass(frozen=True)
class MixtureSpec:
    """Gaussian mixture; illustrative RR-interval defaults in milliseconds."""

    weights: tuple[float, ...] = (0.9, 0.1)
    means: tuple[float, ...] = (800.0, 400.0)
    variances: tuple[float, ...] = (900.0, 400.0)

    def __post_init__(self) -> None:
        k = len(self.weights)
        if k == 0 or len(self.means) != k or len(self.variances) != k:
            raise ValueError("weights, means and variances must have the same nonzero length")
        if any(w < 0 or w > 1 for w in self.weights):
            raise ValueError("weights must lie in [0, 1]")
        if abs(math.fsum(self.weights) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        if any(not v > 0 for v in self.variances):
            raise ValueError("component variances must be positive")

    @property
    def K(self) -> int:
        return len(self.weights)

    def mean(self) -> float:
        return math.fsum(w * m for w, m in zip(self.weights, self.means))

    def variance(self) -> float:
        second = math.fsum(w * (v + m * m) for w, m, v in zip(self.weights, self.means, self.variances))
        return second - self.mean() ** 2


@dataclass(frozen=True)
class Gaussian:
    mean: float = 0.0
    var: float = 1.0

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if not self.var > 0:
            raise ValueError("variance must be positive")
        return self.mean + math.sqrt(self.var) * rng.standard_normal(n)


@dataclass(frozen=True)
class Sinusoid:
    """Deterministic ``amplitude * sin(2 pi t / period + phase) + offset``."""

    amplitude: float = 2.0
    period: float = 50.0
    phase: float = 0.0
    offset: float = 0.0

    def draw(self, n: int, rng: np.random.Generator | None = None) -> np.ndarray:
        t = np.arange(n, dtype=float)
        return self.offset + self.amplitude * np.sin(2.0 * np.pi * t / self.period + self.phase)


@dataclass(frozen=True)
class Mixture:
    spec: MixtureSpec = MixtureSpec()

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return _draw_mixture(n, self.spec, rng)[0]


Source = Union[Gaussian, Sinusoid, Mixture]


@dataclass(frozen=True)
class SegmentLabel:
    start: int
    stop: int
    label: str

    def to_dict(self) -> dict:
        return {"start": self.start, "stop": self.stop, "label": self.label}


def _draw_mixture(n: int, spec: MixtureSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    z_noise = rng.standard_normal(n)
    if spec.K == 1:
        z = np.zeros(n, dtype=np.int64)
    else:
        u = rng.random(n)
        z = np.searchsorted(np.cumsum(spec.weights), u, side="right")
        z = np.minimum(z, spec.K - 1)
    mu = np.asarray(spec.means, dtype=float)[z]
    sd = np.sqrt(np.asarray(spec.variances, dtype=float))[z]
    return mu + sd * z_noise, z


def gen_gaussian(n: int, mean: float = 0.0, var: float = 1.0, seed: int | None = 0) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    return Gaussian(mean, var).draw(n, np.random.default_rng(seed))


def gen_mixture(n: int, spec: MixtureSpec, seed: int | None = 0) -> tuple[np.ndarray, np.ndarray]:
    """Samples and their latent component indices."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return _draw_mixture(n, spec, np.random.default_rng(seed))


def gen_composite(
    segments: Sequence[tuple], seed: int | None = 0
) -> tuple[np.ndarray, list[SegmentLabel]]:
    """Concatenate ``(source, length)`` or ``(source, length, label)`` pieces.

    Unlabeled pieces are background; labeled ones are returned with their
    half-open sample range. One generator is shared across pieces in order.
    """
    if not segments:
        raise ValueError("composite needs at least one segment")
    rng = np.random.default_rng(seed)
    parts: list[np.ndarray] = []
    labels: list[SegmentLabel] = []
    pos = 0
    for piece in segments:
        source, length = piece[0], int(piece[1])
        label = piece[2] if len(piece) > 2 else None
        if length < 1:
            raise ValueError("segment lengths must be >= 1")
        parts.append(source.draw(length, rng))
        if label:
            labels.append(SegmentLabel(pos, pos + length, str(label)))
        pos += length
    return np.concatenate(parts), labels


def two_anomaly_segments(
    background: float = 4.0,
    low_var: float = 1.0,
    amplitude: float = 2.0,
    period: float = 50.0,
    phase: float = 0.0,
    gap: int = 2000,
    episode: int = 400,
) -> list[tuple]:
    """Background N(0, 4) with a sinusoid episode and a low-variance episode."""
    bg = Gaussian(0.0, background)
    return [
        (bg, gap),
        (Sinusoid(amplitude, period, phase), episode, "sinusoid"),
        (bg, gap),
        (Gaussian(0.0, low_var), episode, "low_variance"),
        (bg, gap),
    ]


def two_anomaly_stream(seed: int | None = 0, **kwargs) -> tuple[np.ndarray, list[SegmentLabel]]:
    return gen_composite(two_anomaly_segments(**kwargs), seed)


def anomaly_mask(n: int, labels: Sequence[SegmentLabel]) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    for lab in labels:
        mask[lab.start : lab.stop] = True
    return mask
