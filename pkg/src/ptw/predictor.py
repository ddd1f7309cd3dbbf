"""Sequential predictive-MDL densities for a Gaussian source.

Two predictors share one set of running statistics:

* ``op`` (ordinary predictive): plug-in Gaussian with the running mean and
  unbiased variance ``S_n^2 = ssd / (n - 1)``.
* ``ss`` (sufficient statistic): the Student-t posterior predictive

      p(x | x_1..x_n) = sqrt(n / (pi (n+1))) * G(n) * A_n^(n/2) / A_{n+1}^((n+1)/2)

  with ``G(n) = Gamma((n+1)/2) / Gamma(n/2)`` and ``A_n`` the sum of
  squared deviations of the first ``n`` samples. This is exact for the
  improper prior ``p(mu, sigma^2) ~ sigma^-3`` and integrates to one for
  every ``n >= 2``; products over a sequence telescope.

Everything is returned as a base-2 log density. Linear-scale densities are
never formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Literal

PredictorKind = Literal["op", "ss"]

LN2 = math.log(2.0)
LOG2_E = 1.0 / LN2
LOG2_PI = math.log2(math.pi)
MIN_COUNT = 2


class DegenerateStatsError(ValueError):
    """Raised when fewer than two samples back a prediction."""


@dataclass(frozen=True, slots=True)
class GaussianStats:
    """Running count, mean and sum of squared deviations (Welford)."""

    count: int = 0
    mean: float = 0.0
    ssd: float = 0.0

    @property
    def variance(self) -> float:
        """Unbiased sample variance; 0.0 below two samples."""
        if self.count < 2:
            return 0.0
        return self.ssd / (self.count - 1)

    def update(self, x: float) -> "GaussianStats":
        return stats_update(self, x)

    @classmethod
    def from_samples(cls, xs: Iterable[float]) -> "GaussianStats":
        s = cls()
        for x in xs:
            s = stats_update(s, x)
        return s


def welford_step(count: float, mean: float, ssd: float, x: float) -> tuple[float, float, float]:
    """One Welford step on raw numbers; shared by every caller on the hot path."""
    count1 = count + 1
    delta = x - mean
    mean1 = mean + delta / count1
    ssd1 = ssd + delta * (x - mean1)
    if ssd1 < 0.0:
        ssd1 = 0.0
    return count1, mean1, ssd1


def stats_update(s: GaussianStats, x: float) -> GaussianStats:
    count, mean, ssd = welford_step(s.count, s.mean, s.ssd, x)
    return GaussianStats(int(count), mean, ssd)


@lru_cache(maxsize=65536)
def log2_gamma_ratio(n: int) -> float:
    """log2( Gamma((n+1)/2) / Gamma(n/2) )."""
    return (math.lgamma(0.5 * (n + 1)) - math.lgamma(0.5 * n)) * LOG2_E


def log2_density_op(count: float, mean: float, ssd: float, x: float, floor: float) -> float:
    var = ssd / (count - 1)
    if var < floor:
        var = floor
    d = x - mean
    return -0.5 * (math.log2(2.0 * var) + LOG2_PI) - (d * d) / (2.0 * var) * LOG2_E


def log2_density_ss(count: float, mean: float, ssd: float, x: float, floor: float) -> float:
    n = count
    d = x - mean
    a = ssd
    if a < n * floor:
        a = n * floor
    b = ssd + d * d * n / (n + 1)
    if b < (n + 1) * floor:
        b = (n + 1) * floor
    return (
        0.5 * math.log2(n / (math.pi * (n + 1)))
        + log2_gamma_ratio(int(n))
        + 0.5 * n * math.log2(a / b)
        - 0.5 * math.log2(b)
    )


_RAW: dict[str, Callable[[float, float, float, float, float], float]] = {
    "op": log2_density_op,
    "ss": log2_density_ss,
}


def raw_predictor(kind: str) -> Callable[[float, float, float, float, float], float]:
    try:
        return _RAW[kind]
    except KeyError:
        raise ValueError(f"unknown predictor kind {kind!r}; expected 'op' or 'ss'") from None


def _check(s: GaussianStats, floor: float) -> None:
    if s.count < MIN_COUNT:
        raise DegenerateStatsError(
            f"prediction needs at least {MIN_COUNT} samples, got {s.count}"
        )
    if not floor > 0.0:
        raise ValueError("variance floor must be positive")


def predict_op(s: GaussianStats, x_next: float, floor: float = 1e-8) -> float:
    """log2 of the plug-in Gaussian density of ``x_next``."""
    _check(s, floor)
    return log2_density_op(s.count, s.mean, s.ssd, x_next, floor)


def predict_ss(s: GaussianStats, x_next: float, floor: float = 1e-8) -> float:
    """log2 of the sufficient-statistic (Student-t) predictive density of ``x_next``."""
    _check(s, floor)
    return log2_density_ss(s.count, s.mean, s.ssd, x_next, floor)


def predict(kind: PredictorKind, s: GaussianStats, x_next: float, floor: float = 1e-8) -> float:
    _check(s, floor)
    return raw_predictor(kind)(s.count, s.mean, s.ssd, x_next, floor)


def sequential_log2(
    xs: Iterable[float],
    kind: PredictorKind = "ss",
    floor: float = 1e-8,
    init: GaussianStats | None = None,
) -> list[float]:
    """Per-sample log2 predictive densities of ``xs``.

    Without ``init`` the first two samples only seed the statistics and
    are not scored, so the result has ``len(xs) - 2`` entries.
    """
    f = raw_predictor(kind)
    out: list[float] = []
    if init is None:
        count, mean, ssd = 0.0, 0.0, 0.0
    else:
        count, mean, ssd = float(init.count), init.mean, init.ssd
    for x in xs:
        if count >= MIN_COUNT:
            out.append(f(count, mean, ssd, x, floor))
        count, mean, ssd = welford_step(count, mean, ssd, x)
    return out


def sequential_codelength(
    xs: Iterable[float],
    kind: PredictorKind = "ss",
    floor: float = 1e-8,
    init: GaussianStats | None = None,
) -> float:
    """Total differential codelength in bits, ``-sum log2 p(x_i | past)``."""
    # uncompensated left-to-right sum: matches the tree's block accumulation bit for bit
    total = 0.0
    for lp in sequential_log2(xs, kind, floor, init):
        total += lp
    return -total


def gaussian_entropy_bits(var: float) -> float:
    """Differential entropy of N(., var) in bits."""
    return 0.5 * math.log2(2.0 * math.pi * math.e * var)
