"""CUSUM and MissCUSUM transformations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import MaskedMatrix, ObservationCounts, fully_observed, observation_counts


@dataclass(frozen=True)
class CusumMatrix:
    """``p x (n-1)`` contrast statistics with a per-entry validity mask.

    Column ``t - 1`` holds the contrast between times ``1..t`` and
    ``t+1..n``. An entry is valid when both sides contain at least one
    observation; invalid entries are exactly 0.
    """

    stats: np.ndarray
    valid: np.ndarray

    @property
    def shape(self) -> tuple:
        return self.stats.shape


@dataclass(frozen=True)
class GammaVector:
    entries: np.ndarray
    z: int
    n: int


def miss_cusum(m: MaskedMatrix) -> CusumMatrix:
    """MissCUSUM transform of a masked matrix.

    For each row ``j`` and split ``t`` with observations on both sides::

        sqrt(L * R / N) * (mean of observed right values - mean of observed left values)

    where ``L``/``R`` count observations left/right of the split and
    ``N = L + R``. All other entries are 0. Runs in ``O(p n)``.
    """
    counts = observation_counts(m)
    left_n = counts.left[:, :-1].astype(np.float64)
    total_n = counts.total.astype(np.float64)[:, None]
    right_n = total_n - left_n

    left_sum = np.cumsum(m.values, axis=1)
    right_sum = left_sum[:, -1:] - left_sum[:, :-1]
    left_sum = left_sum[:, :-1]

    valid = (left_n > 0) & (right_n > 0)
    # clamped denominators keep invalid entries finite; they are zeroed below
    L = np.maximum(left_n, 1.0)
    R = np.maximum(right_n, 1.0)
    N = np.maximum(total_n, 1.0)
    stats = np.sqrt(left_n * right_n / N) * (right_sum / R - left_sum / L)
    stats[~valid] = 0.0
    return CusumMatrix(stats=stats, valid=valid.astype(np.int8))


def cusum(values) -> CusumMatrix:
    """Standard CUSUM transform, i.e. MissCUSUM with nothing missing."""
    return miss_cusum(fully_observed(values))


def gamma_vector(n: int, z: int) -> GammaVector:
    """CUSUM of a unit mean change at ``z`` in a series of length ``n``.

    Entry ``t`` (1-based) is ``sqrt(t/(n-t)) (n-z) / sqrt(n)`` for ``t <= z``
    and ``sqrt((n-t)/t) z / sqrt(n)`` afterwards, peaking at ``t = z``.
    """
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    if not 1 <= z <= n - 1:
        raise ValueError(f"z must lie in [1, {n - 1}], got {z}")
    t = np.arange(1, n, dtype=np.float64)
    entries = np.where(
        t <= z,
        np.sqrt(t / (n - t)) * (n - z),
        np.sqrt((n - t) / t) * z,
    ) / np.sqrt(n)
    return GammaVector(entries=entries, z=z, n=n)


def noiseless_peak(theta_j: float, counts: ObservationCounts, j: int, z: int) -> float:
    """Peak of the absolute noiseless MissCUSUM series in row ``j`` (0-based).

    ``z`` is the 1-based changepoint location.
    """
    total = int(counts.total[j])
    if total == 0:
        raise ValueError(f"row {j} has no observations")
    n = counts.left.shape[1]
    left = int(counts.left[j, z - 1])
    right = int(counts.right[j, n - z - 1])
    return abs(theta_j) * np.sqrt(left * right / total)
