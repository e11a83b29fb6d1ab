"""Partially observed data matrices and their observation counts.

Arrays are stored 0-based. Public surfaces (CLI output, changepoint
estimates) report 1-based time indices; ``left[:, t - 1]`` holds the
number of observations among the first ``t`` time points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class MaskedMatrix:
    """A ``p x n`` data matrix paired with its revelation mask.

    Rows are coordinates, columns are time points. Entries where the
    mask is 0 are stored as 0; the mask is the single source of truth
    for what was observed.
    """

    values: np.ndarray
    mask: np.ndarray
    labels: Optional[tuple] = None  # per time point
    row_labels: Optional[tuple] = None  # per coordinate

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def columns(self, idx) -> "MaskedMatrix":
        """Sub-matrix made of the given (0-based) columns."""
        labels = None
        if self.labels is not None:
            labels = tuple(np.asarray(self.labels, dtype=object)[idx])
        return build_masked(self.values[:, idx], self.mask[:, idx], labels=labels,
                            row_labels=self.row_labels)

    def rows(self, idx) -> "MaskedMatrix":
        row_labels = None
        if self.row_labels is not None:
            row_labels = tuple(np.asarray(self.row_labels, dtype=object)[idx])
        return build_masked(self.values[idx, :], self.mask[idx, :], labels=self.labels,
                            row_labels=row_labels)


@dataclass(frozen=True)
class ObservationCounts:
    """Running observation counts per coordinate.

    ``left[j, t-1]`` counts observations in times ``1..t``; ``right[j, t-1]``
    counts observations in the last ``t`` times; ``total[j]`` is the row total.
    """

    left: np.ndarray
    right: np.ndarray
    total: np.ndarray


def build_masked(
    values,
    mask,
    labels: Optional[Sequence] = None,
    row_labels: Optional[Sequence] = None,
) -> MaskedMatrix:
    """Validate ``values``/``mask`` and zero the unobserved entries.

    Raises
    ------
    ValueError
        If the shapes differ, fewer than two time points are given, the
        mask is not binary, or an observed entry is not finite.
    """
    values = np.array(values, dtype=np.float64, copy=True, order="C")
    mask_arr = np.asarray(mask)
    if values.ndim == 1:
        values = values[None, :]
    if mask_arr.ndim == 1:
        mask_arr = mask_arr[None, :]
    if values.ndim != 2:
        raise ValueError(f"values must be a 2-d matrix, got {values.ndim} dimensions")
    if values.shape != mask_arr.shape:
        raise ValueError(
            f"values shape {values.shape} does not match mask shape {mask_arr.shape}"
        )
    p, n = values.shape
    if p < 1:
        raise ValueError("need at least one coordinate (row)")
    if n < 2:
        raise ValueError(f"need at least 2 time points, got n={n}")
    if not np.all((mask_arr == 0) | (mask_arr == 1)):
        raise ValueError("mask must be binary (0/1)")
    mask_arr = np.ascontiguousarray(mask_arr, dtype=np.int8)
    observed = mask_arr == 1
    bad = observed & ~np.isfinite(values)
    if bad.any():
        j, t = np.argwhere(bad)[0]
        raise ValueError(f"non-finite observed value at row {j + 1}, time {t + 1}")
    values[~observed] = 0.0
    if labels is not None:
        labels = tuple(labels)
        if len(labels) != n:
            raise ValueError(f"{len(labels)} labels given for {n} time points")
    if row_labels is not None:
        row_labels = tuple(row_labels)
        if len(row_labels) != p:
            raise ValueError(f"{len(row_labels)} row labels given for {p} rows")
    values.setflags(write=False)
    mask_arr.setflags(write=False)
    return MaskedMatrix(values=values, mask=mask_arr, labels=labels, row_labels=row_labels)


def fully_observed(values) -> MaskedMatrix:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[None, :]
    return build_masked(values, np.ones(values.shape, dtype=np.int8))


def observation_counts(m: MaskedMatrix) -> ObservationCounts:
    omega = m.mask.astype(np.int64)
    left = np.cumsum(omega, axis=1)
    right = np.cumsum(omega[:, ::-1], axis=1)
    return ObservationCounts(left=left, right=right, total=left[:, -1].copy())
