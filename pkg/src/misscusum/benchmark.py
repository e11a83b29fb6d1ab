"""Preset simulation grids and the log-log slope fit for scaling studies."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from itertools import product
from typing import Iterable, Optional, Sequence

import numpy as np

from .simulation import CampaignCell

FIG2_SCALES = (0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0)


def fig1_cells() -> list:
    return [CampaignCell(n=250, p=100, z=100, k=10, signal=2.0, sigma=1.0, q=0.2)]


def fig2_cells(
    ks: Sequence[int] = (3, 10, 50),
    signals: Sequence[float] = (1.0, 1.5, 2.0, 2.5, 3.0),
    scales: Sequence[float] = FIG2_SCALES,
    q: float = 0.2,
) -> list:
    """Penalty-scale sweep: n=1000, p=500, z=400, sigma=1, constant q."""
    return [
        CampaignCell(n=1000, p=500, z=400, k=k, signal=s, sigma=1.0, q=q, lambda_scale=a)
        for k, s, a in product(ks, signals, scales)
    ]


def fig3_cells(
    signals: Sequence[float] = (0.5, 1.0, 2.0),
    sigmas: Sequence[float] = (0.2, 0.4, 0.8, 1.6),
    qs: Sequence[float] = (0.1, 0.2, 0.4, 0.8),
    n: int = 1200,
    p: int = 1000,
) -> list:
    """Error vs weighted signal norm: k=3, z=400, flat theta, constant q."""
    return [
        CampaignCell(n=n, p=p, z=400, k=3, signal=s, sigma=sd, q=q)
        for s, sd, q in product(signals, sigmas, qs)
    ]


def table1_cells(
    nus: Sequence[float] = (0.1, 0.5),
    ks: Sequence[int] = (3, 44, 2000),
    signals: Sequence[float] = (1.0, 2.0, 3.0),
) -> list:
    """Beta-distributed rates, harmonic theta: n=1200, p=2000, z=400."""
    return [
        CampaignCell(n=1200, p=2000, z=400, k=k, signal=s, sigma=1.0, q=None,
                     q_beta_nu=nu, theta_shape="harmonic")
        for nu, k, s in product(nus, ks, signals)
    ]


PRESETS = {
    "fig1": (fig1_cells, 1000),
    "fig2": (fig2_cells, 200),
    "fig3": (fig3_cells, 200),
    "table1": (table1_cells, 200),
}


def preset_cells(name: str) -> list:
    try:
        return PRESETS[name][0]()
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def load_grid(path) -> list:
    """Read cells from JSON: a list of objects, or ``{"cells": [...]}``.

    Keys are :class:`CampaignCell` field names; unknown keys are rejected.
    """
    with open(path) as fh:
        doc = json.load(fh)
    items = doc["cells"] if isinstance(doc, dict) else doc
    known = {f.name for f in fields(CampaignCell)}
    cells = []
    for i, item in enumerate(items):
        extra = set(item) - known
        if extra:
            raise ValueError(f"grid cell {i}: unknown keys {sorted(extra)}")
        cells.append(CampaignCell(**item))
    if not cells:
        raise ValueError("grid file has no cells")
    return cells


# --------------------------------------------------------------------------
# slopes

# A point is used in a slope fit only inside these bands. Location errors
# below 1 sit on the integer-resolution floor; above 5% of n the estimator
# has effectively lost the change. A mean sine above 0.5 (30 degrees) is
# the saturated regime.
LOCATION_BAND = (1.0, 0.05)
SINE_CEILING = 0.5
MIN_POINTS = 3


@dataclass(frozen=True)
class SlopeFit:
    metric: str
    curve: Optional[tuple]  # (signal, sigma); None for the pooled fit
    slope: float
    points: int
    eligible: bool


def _eligible(metric: str, value: float, n: int) -> bool:
    if not math.isfinite(value) or value <= 0:
        return False
    if metric == "abs_error_mean":
        lo, hi_frac = LOCATION_BAND
        return lo <= value <= hi_frac * n
    if metric == "sine_mean":
        return value <= SINE_CEILING
    return True


def _slope(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    return float(xc @ (y - y.mean()) / (xc @ xc))


def fit_slopes(rows: Iterable[dict], metric: str) -> list:
    """Least-squares slopes of ``log(metric)`` against ``log(weighted_norm)``.

    One fit per ``(signal, sigma)`` curve, over the points inside the
    band for ``metric``; a curve needs at least three such points with
    distinct norms. The final entry is a pooled fit: a common slope with
    a separate intercept for every eligible curve.
    """
    curves = {}
    for row in rows:
        curves.setdefault((row["signal"], row["sigma"]), []).append(row)
    fits = []
    pooled_x, pooled_y = [], []
    for key in sorted(curves):
        pts = [(math.log(r["weighted_norm"]), math.log(r[metric]))
               for r in curves[key] if _eligible(metric, r[metric], r["n"])]
        xs = np.array([p[0] for p in pts])
        ok = len(pts) >= MIN_POINTS and np.unique(xs).size >= 2
        if not ok:
            fits.append(SlopeFit(metric, key, math.nan, len(pts), False))
            continue
        ys = np.array([p[1] for p in pts])
        fits.append(SlopeFit(metric, key, _slope(xs, ys), len(pts), True))
        pooled_x.append(xs - xs.mean())
        pooled_y.append(ys - ys.mean())
    if pooled_x:
        x = np.concatenate(pooled_x)
        y = np.concatenate(pooled_y)
        fits.append(SlopeFit(metric, None, float(x @ y / (x @ x)), x.size, True))
    else:
        fits.append(SlopeFit(metric, None, math.nan, 0, False))
    return fits


def pooled_slope(fits: Sequence[SlopeFit]) -> float:
    return fits[-1].slope


def slopes_csv(fits: Sequence[SlopeFit]) -> str:
    lines = ["metric,signal,sigma,slope,points,eligible"]
    for f in fits:
        sig, sd = ("pooled", "pooled") if f.curve is None else (repr(f.curve[0]), repr(f.curve[1]))
        lines.append(f"{f.metric},{sig},{sd},{f.slope!r},{f.points},{'true' if f.eligible else 'false'}")
    return "\n".join(lines) + "\n"
