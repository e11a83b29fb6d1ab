"""Single changepoint estimation from a projected MissCUSUM series."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .cusum import miss_cusum
from .data import MaskedMatrix
from .errors import AllInvalid
from .projection import ProjectionEstimate, SolverConfig, default_lambda, estimate_projection

# 1 / Phi^{-1}(3/4): makes the MAD consistent for the Gaussian sd
MAD_SCALE = 1.4826


class Variant(str, Enum):
    FULL = "full"
    SPLIT = "split"


@dataclass(frozen=True)
class ChangepointEstimate:
    """Estimated changepoint with the series it was read off.

    ``z_hat`` is 1-based: the mean is estimated to change between times
    ``z_hat`` and ``z_hat + 1``. ``projected[t - 1]`` is the projected
    statistic at split ``t``.
    """

    z_hat: int
    projected: np.ndarray
    peak_value: float
    projection: ProjectionEstimate
    variant: Variant
    lam: float


def median_argmax(series) -> int:
    """1-based lower median of the indices where ``|series|`` is maximal."""
    x = np.abs(np.asarray(series, dtype=np.float64))
    if x.size == 0:
        raise ValueError("series is empty")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    ties = np.flatnonzero(x == x.max())
    return int(ties[(len(ties) - 1) // 2]) + 1


def _locate(projection: ProjectionEstimate, stats: np.ndarray):
    projected = projection.v_hat @ stats
    return median_argmax(projected), projected, float(np.max(np.abs(projected)))


def miss_inspect(
    m: MaskedMatrix, lam: float, config: Optional[SolverConfig] = None
) -> ChangepointEstimate:
    """Estimate a single changepoint using all time points.

    Raises
    ------
    AllInvalid
        If no row has observations on both sides of any split.
    DegeneratePenalty
        If ``lam`` is not below the largest row norm of the MissCUSUM matrix.
    """
    T = miss_cusum(m)
    if not T.valid.any():
        raise AllInvalid("no coordinate has observations on both sides of any split")
    proj = estimate_projection(T, lam, config=config or SolverConfig())
    z_hat, projected, peak = _locate(proj, T.stats)
    return ChangepointEstimate(z_hat, projected, peak, proj, Variant.FULL, float(lam))


def split_columns(m: MaskedMatrix) -> tuple[MaskedMatrix, MaskedMatrix]:
    """Split into odd and even time points, ``floor(n/2)`` columns each.

    With an odd ``n`` the last time point is dropped.
    """
    if m.n < 4:
        raise ValueError(f"sample splitting needs n >= 4, got n={m.n}")
    half = m.n // 2
    odd = np.arange(0, 2 * half, 2)
    return m.columns(odd), m.columns(odd + 1)


def miss_inspect_split(
    m: MaskedMatrix, lam: float, config: Optional[SolverConfig] = None
) -> ChangepointEstimate:
    """Sample-splitting variant.

    The direction is estimated from the odd time points and the change
    is located on the even ones; ``z_hat = 2 * (lower median argmax)``,
    so it is always even. ``lam`` is used as given; see
    :class:`LambdaRule` for the half-length default.
    """
    first, second = split_columns(m)
    T1 = miss_cusum(first)
    T2 = miss_cusum(second)
    if not T1.valid.any() or not T2.valid.any():
        raise AllInvalid("a sample-split half has no coordinate observed on both sides of any split")
    proj = estimate_projection(T1, lam, config=config or SolverConfig())
    idx, projected, peak = _locate(proj, T2.stats)
    return ChangepointEstimate(2 * idx, projected, peak, proj, Variant.SPLIT, float(lam))


def _row_sigma(values: np.ndarray) -> float:
    d = np.diff(values)
    mad = np.median(np.abs(d - np.median(d)))
    if mad > 0:
        return MAD_SCALE * mad / math.sqrt(2)
    # MAD collapses when most increments are exactly equal (e.g. a
    # single jump in an otherwise flat row)
    if d.size < 2:
        return 0.0
    return float(np.std(d, ddof=1)) / math.sqrt(2)


def estimate_sigma(m: MaskedMatrix) -> float:
    """Robust noise scale from first differences of observed values.

    Each row with at least two observations gives
    ``1.4826 * MAD(diff(observed values)) / sqrt(2)``; the median over
    those rows is returned. Differencing removes the piecewise constant
    mean except at the changepoints themselves.
    """
    per_row = []
    for j in range(m.p):
        obs = m.values[j, m.mask[j] == 1]
        if obs.size >= 2:
            per_row.append(_row_sigma(obs))
    if not per_row:
        raise ValueError("no row has two or more observed values; cannot estimate sigma")
    return float(np.median(per_row))


@dataclass(frozen=True)
class LambdaRule:
    """How the penalty is chosen for a (sub)matrix.

    Either a fixed ``value``, or ``scale * sigma * sqrt(n log(p n))`` where
    ``sigma`` is supplied or estimated from the data. For the split
    variant ``n`` is the half length ``floor(n/2)`` unless
    ``split_basis="n"``.
    """

    scale: float = 0.5
    sigma: Optional[float] = None
    value: Optional[float] = None
    split_basis: str = "n1"

    def __post_init__(self):
        if self.split_basis not in ("n1", "n"):
            raise ValueError(f"split_basis must be 'n1' or 'n', got {self.split_basis!r}")
        if self.value is not None and not self.value > 0:
            raise ValueError("fixed penalty must be positive")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.scale > 0:
            raise ValueError("lambda scale must be positive")

    def effective_length(self, n: int, variant: Variant) -> int:
        if Variant(variant) is Variant.SPLIT and self.split_basis == "n1":
            return n // 2
        return n

    def penalty(self, m: MaskedMatrix, variant: Variant = Variant.FULL, sigma: Optional[float] = None) -> float:
        if self.value is not None:
            return float(self.value)
        if sigma is None:
            sigma = self.sigma if self.sigma is not None else estimate_sigma(m)
        return default_lambda(self.effective_length(m.n, variant), m.p, sigma, self.scale)


def detect(
    m: MaskedMatrix,
    lam: float,
    variant: Variant = Variant.FULL,
    config: Optional[SolverConfig] = None,
) -> ChangepointEstimate:
    if Variant(variant) is Variant.SPLIT:
        return miss_inspect_split(m, lam, config)
    return miss_inspect(m, lam, config)
