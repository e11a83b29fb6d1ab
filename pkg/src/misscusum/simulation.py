"""Data generation from the single-changepoint missing-data model, plus
evaluation metrics and a seeded Monte Carlo campaign runner.

Random streams
--------------
Every replicate owns a 64-bit seed. Its values, mask and (when drawn)
observation rates come from three independent ``numpy`` PCG64
generators seeded by ``SeedSequence(seed, spawn_key=(i,))`` with
``i = 0, 1, 2`` respectively. Gaussian noise uses ``Generator.standard_normal``
(numpy's ziggurat sampler); mask entries are ``uniform < q_j``.

In a campaign, replicate ``r`` of grid cell ``c`` gets the seed
``SeedSequence(base_seed, spawn_key=(c, r)).generate_state(1, uint64)[0]``.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Iterable, Optional, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .data import MaskedMatrix, build_masked
from .detect import LambdaRule, Variant, detect
from .errors import MissCusumError
from .projection import SolverConfig

VALUES_STREAM, MASK_STREAM, RATES_STREAM = 0, 1, 2


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of one draw from the single-changepoint model.

    ``theta`` is the mean change (post minus pre), ``q`` the per-row
    observation probabilities.
    """

    n: int
    p: int
    z: int
    theta: np.ndarray
    sigma: float = 1.0
    q: Optional[np.ndarray] = None
    mu1: Optional[np.ndarray] = None
    seed: int = 0

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=np.float64)
        object.__setattr__(self, "theta", theta)
        q = np.ones(self.p) if self.q is None else np.broadcast_to(
            np.asarray(self.q, dtype=np.float64), (self.p,)
        ).copy()
        object.__setattr__(self, "q", q)
        mu1 = np.zeros(self.p) if self.mu1 is None else np.asarray(self.mu1, dtype=np.float64)
        object.__setattr__(self, "mu1", mu1)

        if self.n < 2 or self.p < 1:
            raise ValueError(f"need n >= 2 and p >= 1, got n={self.n}, p={self.p}")
        if not 1 <= self.z <= self.n - 1:
            raise ValueError(f"z must lie in [1, {self.n - 1}], got {self.z}")
        if theta.shape != (self.p,) or mu1.shape != (self.p,):
            raise ValueError("theta and mu1 must have length p")
        if not np.any(theta != 0):
            raise ValueError("theta must be nonzero")
        if not np.all((q > 0) & (q <= 1)):
            raise ValueError("observation rates must lie in (0, 1]")
        if not self.sigma >= 0:
            raise ValueError("sigma must be nonnegative")

    @property
    def k(self) -> int:
        return int(np.count_nonzero(self.theta))

    @property
    def tau(self) -> float:
        return min(self.z, self.n - self.z) / self.n

    def mean_matrix(self) -> np.ndarray:
        mu = np.repeat(self.mu1[:, None], self.n, axis=1)
        mu[:, self.z:] += self.theta[:, None]
        return mu


def substream(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))


def simulate(spec: ModelSpec) -> MaskedMatrix:
    """Draw ``(X o Omega, Omega)`` for ``spec``; deterministic in ``spec.seed``."""
    values = spec.mean_matrix()
    if spec.sigma > 0:
        values += spec.sigma * substream(spec.seed, VALUES_STREAM).standard_normal((spec.p, spec.n))
    u = substream(spec.seed, MASK_STREAM).random((spec.p, spec.n))
    mask = (u < spec.q[:, None]).astype(np.int8)
    return build_masked(values, mask)


def flat_theta(p: int, k: int, signal: float) -> np.ndarray:
    """``signal / sqrt(k)`` on the first ``k`` coordinates, 0 elsewhere."""
    if not 1 <= k <= p:
        raise ValueError(f"k must lie in [1, {p}], got {k}")
    theta = np.zeros(p)
    theta[:k] = signal / math.sqrt(k)
    return theta


def harmonic_theta(p: int, k: int, signal: float) -> np.ndarray:
    """Proportional to ``(1, 2^-1/2, ..., k^-1/2, 0, ...)`` with l2 norm ``signal``."""
    if not 1 <= k <= p:
        raise ValueError(f"k must lie in [1, {p}], got {k}")
    theta = np.zeros(p)
    theta[:k] = 1.0 / np.sqrt(np.arange(1, k + 1))
    return signal * theta / np.linalg.norm(theta)


THETA_SHAPES = {"flat": flat_theta, "harmonic": harmonic_theta}


def oracle_direction(theta, q) -> np.ndarray:
    v = np.asarray(theta, dtype=np.float64) * np.sqrt(np.asarray(q, dtype=np.float64))
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("theta * sqrt(q) is the zero vector")
    return v / norm


def sine_angle(u, v) -> float:
    """Sine of the acute angle between ``u`` and ``v`` (sign-invariant)."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("angle with the zero vector is undefined")
    c = min(1.0, abs(float(u @ v)) / (nu * nv))
    return math.sin(math.acos(c))


def weighted_norm(theta, q) -> float:
    """``sqrt(sum_j theta_j^2 q_j)``."""
    theta = np.asarray(theta, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if theta.shape != q.shape:
        raise ValueError(f"length mismatch: theta {theta.shape} vs q {q.shape}")
    return math.sqrt(float(np.sum(theta * theta * q)))


# --------------------------------------------------------------------------
# campaigns


@dataclass(frozen=True)
class CampaignCell:
    """One grid cell: model parameters plus method configuration.

    Observation rates come from exactly one of: ``q`` (constant),
    ``q_signal``/``q_noise`` (by support of theta), or ``q_beta_nu``
    (``q_j ~ Beta(10 nu, 10 (1 - nu))``, redrawn per replicate).
    """

    n: int
    p: int
    z: int
    k: int
    signal: float
    sigma: float = 1.0
    q: Optional[float] = 1.0
    q_signal: Optional[float] = None
    q_noise: Optional[float] = None
    q_beta_nu: Optional[float] = None
    theta_shape: str = "flat"
    variant: str = "full"
    lambda_scale: float = 0.5
    lambda_value: Optional[float] = None
    sigma_known: bool = True

    def __post_init__(self):
        if self.theta_shape not in THETA_SHAPES:
            raise ValueError(f"unknown theta shape {self.theta_shape!r}")
        Variant(self.variant)
        if self.q_beta_nu is not None and not 0 < self.q_beta_nu < 1:
            raise ValueError("q_beta_nu must lie in (0, 1)")

    def theta(self) -> np.ndarray:
        return THETA_SHAPES[self.theta_shape](self.p, self.k, self.signal)

    def rates(self, seed: int, theta: np.ndarray) -> np.ndarray:
        if self.q_beta_nu is not None:
            nu = self.q_beta_nu
            return substream(seed, RATES_STREAM).beta(10 * nu, 10 * (1 - nu), size=self.p)
        if self.q_signal is not None or self.q_noise is not None:
            qs = 1.0 if self.q_signal is None else self.q_signal
            qn = 1.0 if self.q_noise is None else self.q_noise
            return np.where(theta != 0, qs, qn)
        return np.full(self.p, 1.0 if self.q is None else self.q)

    def lambda_rule(self) -> LambdaRule:
        return LambdaRule(
            scale=self.lambda_scale,
            sigma=self.sigma if (self.sigma_known and self.sigma > 0) else None,
            value=self.lambda_value,
        )


def replicate_seed(base_seed: int, cell: int, rep: int) -> int:
    ss = np.random.SeedSequence(base_seed, spawn_key=(cell, rep))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class ReplicateResult:
    cell: int
    rep: int
    seed: int
    ok: bool
    z_hat: int = 0
    abs_error: float = math.nan
    sine: float = math.nan
    angle_deg: float = math.nan
    weighted_norm: float = math.nan
    error: str = ""


def run_replicate(cell: CampaignCell, cell_index: int, rep: int, base_seed: int,
                  config: Optional[SolverConfig] = None) -> ReplicateResult:
    seed = replicate_seed(base_seed, cell_index, rep)
    theta = cell.theta()
    q = cell.rates(seed, theta)
    # Beta draws can underflow to exactly 0 for extreme nu
    q = np.clip(q, np.finfo(float).tiny, 1.0)
    spec = ModelSpec(n=cell.n, p=cell.p, z=cell.z, theta=theta, sigma=cell.sigma, q=q, seed=seed)
    wnorm = weighted_norm(theta, q)
    try:
        m = simulate(spec)
        variant = Variant(cell.variant)
        lam = cell.lambda_rule().penalty(m, variant)
        est = detect(m, lam, variant, config)
    except (MissCusumError, ValueError) as exc:
        return ReplicateResult(cell_index, rep, seed, False, weighted_norm=wnorm,
                               error=type(exc).__name__)
    s = sine_angle(est.projection.v_hat, oracle_direction(theta, q))
    return ReplicateResult(
        cell_index, rep, seed, True,
        z_hat=est.z_hat,
        abs_error=float(abs(est.z_hat - cell.z)),
        sine=s,
        angle_deg=math.degrees(math.asin(min(s, 1.0))),
        weighted_norm=wnorm,
    )


def _run_task(args) -> ReplicateResult:
    cell, cell_index, rep, base_seed, config = args
    with threadpool_limits(limits=1):
        return run_replicate(cell, cell_index, rep, base_seed, config)


def worker_count(threads: Optional[int] = None) -> int:
    """Number of worker processes; ``MISSCUSUM_THREADS`` caps it (0 = auto)."""
    if threads is None:
        raw = os.environ.get("MISSCUSUM_THREADS", "0").strip() or "0"
        try:
            threads = int(raw)
        except ValueError:
            raise ValueError(f"MISSCUSUM_THREADS must be an integer, got {raw!r}") from None
    if threads < 0:
        raise ValueError("thread count must be nonnegative")
    if threads == 0:
        threads = os.cpu_count() or 1
    return threads


def _summary(x: Sequence[float]) -> tuple[float, float, float]:
    if len(x) == 0:
        return math.nan, math.nan, math.nan
    arr = np.sort(np.asarray(x, dtype=np.float64))
    mean = math.fsum(arr) / len(arr)
    sd = math.sqrt(math.fsum((arr - mean) ** 2) / (len(arr) - 1)) if len(arr) > 1 else 0.0
    return mean, float(np.median(arr)), sd


CELL_COLUMNS = [f.name for f in fields(CampaignCell)]
STAT_COLUMNS = [
    "reps", "failures", "weighted_norm",
    "angle_deg_mean", "angle_deg_median", "angle_deg_sd",
    "sine_mean", "sine_median", "sine_sd",
    "abs_error_mean", "abs_error_median", "abs_error_sd",
]


@dataclass
class CampaignResult:
    cells: list
    replicates: list = field(repr=False)
    rows: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["cell"] + CELL_COLUMNS + STAT_COLUMNS)
        for row in self.rows:
            writer.writerow([_fmt(row[c]) for c in ["cell"] + CELL_COLUMNS + STAT_COLUMNS])
        return buf.getvalue()


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def aggregate(cells: Sequence[CampaignCell], replicates: Iterable[ReplicateResult]) -> list:
    by_cell = {i: [] for i in range(len(cells))}
    for r in replicates:
        by_cell[r.cell].append(r)
    rows = []
    for i, cell in enumerate(cells):
        reps = sorted(by_cell[i], key=lambda r: r.rep)
        ok = [r for r in reps if r.ok]
        row = {"cell": i, **asdict(cell)}
        row["reps"] = len(reps)
        row["failures"] = len(reps) - len(ok)
        row["weighted_norm"] = _summary([r.weighted_norm for r in reps])[0]
        for name, attr in (("angle_deg", "angle_deg"), ("sine", "sine"), ("abs_error", "abs_error")):
            mean, med, sd = _summary([getattr(r, attr) for r in ok])
            row[f"{name}_mean"], row[f"{name}_median"], row[f"{name}_sd"] = mean, med, sd
        rows.append(row)
    return rows


def run_campaign(
    cells: Sequence[CampaignCell],
    reps: int,
    base_seed: int = 0,
    threads: Optional[int] = None,
    config: Optional[SolverConfig] = None,
) -> CampaignResult:
    """Run ``reps`` seeded replicates of every cell and aggregate them.

    Results do not depend on the number of workers: each replicate owns
    its generator and runs with single-threaded BLAS, and aggregation is
    done in (cell, replicate) order.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    cells = list(cells)
    tasks = [(cell, i, r, base_seed, config) for i, cell in enumerate(cells) for r in range(reps)]
    workers = min(worker_count(threads), len(tasks))
    if workers <= 1:
        results = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    results.sort(key=lambda r: (r.cell, r.rep))
    return CampaignResult(cells=cells, replicates=results, rows=aggregate(cells, results))
