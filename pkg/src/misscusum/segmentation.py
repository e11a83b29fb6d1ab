"""Multiple changepoints by binary segmentation around the single
changepoint estimator."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import MaskedMatrix
from .detect import ChangepointEstimate, LambdaRule, Variant, detect, estimate_sigma
from .errors import DegeneratePenalty, MissCusumError
from .projection import SolverConfig


@dataclass(frozen=True)
class Changepoint:
    """A detected change between times ``z_hat`` and ``z_hat + 1`` (1-based).

    ``segment`` is the inclusive 1-based range of time points that was
    searched, ``prominence`` the peak of its projected series.
    """

    z_hat: int
    prominence: float
    depth: int
    segment: tuple[int, int]
    lam: float
    estimate: Optional[ChangepointEstimate] = field(default=None, compare=False, repr=False)


@dataclass
class SegmentationResult:
    changepoints: list  # sorted by location
    order: list  # indices into changepoints, most prominent first
    diagnostics: list = field(default_factory=list)

    def by_prominence(self) -> list:
        return [self.changepoints[i] for i in self.order]


def binary_segmentation(
    m: MaskedMatrix,
    lambda_rule: Optional[LambdaRule] = None,
    max_changepoints: Optional[int] = 1,
    min_segment: int = 10,
    threshold: Optional[float] = None,
    variant: Variant = Variant.FULL,
    config: Optional[SolverConfig] = None,
    per_segment_sigma: bool = False,
) -> SegmentationResult:
    """Recursive binary segmentation, expanded best-first.

    The whole series is searched first. Each accepted changepoint splits
    its segment into ``[lo, z]`` and ``[z + 1, hi]``; a child is searched
    only if it has at least ``2 * min_segment`` time points. Among all
    pending candidates the most prominent is accepted next, until
    ``max_changepoints`` are accepted or the best remaining prominence is
    below ``threshold``. Segments where the estimator fails (penalty too
    large, nothing observed on both sides) end quietly and are listed in
    ``diagnostics``.

    The noise scale is estimated once on the full data unless
    ``per_segment_sigma`` is set or the rule fixes it.
    """
    if max_changepoints is None and threshold is None:
        raise ValueError("give max_changepoints, threshold, or both")
    if max_changepoints is not None and max_changepoints < 1:
        raise ValueError("max_changepoints must be at least 1")
    if min_segment < 2:
        raise ValueError("min_segment must be at least 2")
    rule = lambda_rule or LambdaRule()
    variant = Variant(variant)

    sigma = None
    if rule.value is None:
        if rule.sigma is not None:
            sigma = rule.sigma
        elif not per_segment_sigma:
            sigma = estimate_sigma(m)

    diagnostics = []
    heap = []

    def search(lo: int, hi: int, depth: int) -> None:
        sub = m.columns(np.arange(lo - 1, hi))
        try:
            lam = rule.penalty(sub, variant, sigma)
            est = detect(sub, lam, variant, config)
        except (MissCusumError, ValueError) as exc:
            entry = {
                "segment": [lo, hi],
                "depth": depth,
                "error": getattr(exc, "code", "invalid_segment"),
                "message": str(exc),
            }
            if isinstance(exc, DegeneratePenalty):
                entry["lambda"] = exc.lam
                entry["two_to_inf_norm"] = exc.norm
            diagnostics.append(entry)
            return
        cp = Changepoint(lo - 1 + est.z_hat, est.peak_value, depth, (lo, hi), lam, est)
        heapq.heappush(heap, (-cp.prominence, cp.z_hat, cp))

    search(1, m.n, 0)
    accepted = []
    while heap:
        if max_changepoints is not None and len(accepted) >= max_changepoints:
            break
        neg_prom, _, cp = heapq.heappop(heap)
        if threshold is not None and -neg_prom < threshold:
            break
        accepted.append(cp)
        lo, hi = cp.segment
        for a, b in ((lo, cp.z_hat), (cp.z_hat + 1, hi)):
            if b - a + 1 >= 2 * min_segment:
                search(a, b, cp.depth + 1)

    changepoints = sorted(accepted, key=lambda c: c.z_hat)
    order = sorted(range(len(changepoints)), key=lambda i: (-changepoints[i].prominence, changepoints[i].z_hat))
    return SegmentationResult(changepoints, order, diagnostics)
