"""Sparse projection direction via soft-thresholded power iteration.

Maximises ``<T, v w^T> - lam * ||v||_1`` over unit-ball ``v`` and ``w`` by
alternating the two closed-form block updates, started from the leading
left singular vector of ``T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cusum import CusumMatrix
from .errors import DegeneratePenalty, ZeroVector


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 100
    tol: float = 1e-8
    init_iter: int = 200
    init_tol: float = 1e-10

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True)
class ProjectionEstimate:
    v_hat: np.ndarray
    w_hat: np.ndarray
    lam: float
    iterations: int
    objective_trace: np.ndarray = field(repr=False)
    converged: bool
    init_iterations: int = 0

    @property
    def objective(self) -> float:
        return float(self.objective_trace[-1])


def _as_array(T) -> np.ndarray:
    if isinstance(T, CusumMatrix):
        return T.stats
    return np.asarray(T, dtype=np.float64)


def soft_threshold(v, lam: float) -> np.ndarray:
    """Componentwise ``sign(v) * max(|v| - lam, 0)``."""
    if lam < 0:
        raise ValueError(f"threshold must be nonnegative, got {lam}")
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)


def two_to_inf_norm(T) -> float:
    """Largest Euclidean norm among the rows of ``T``."""
    M = _as_array(T)
    if M.size == 0:
        return 0.0
    return float(np.sqrt(np.max(np.einsum("ij,ij->i", M, M))))


def sin_angle_unit(u: np.ndarray, v: np.ndarray) -> float:
    # ||v - <u,v> u|| stays accurate for tiny angles, unlike sqrt(1 - c^2).
    c = float(u @ v)
    return float(np.linalg.norm(v - c * u))


def leading_left_singular_vector(
    M: np.ndarray,
    start: Optional[np.ndarray] = None,
    max_iter: int = 200,
    tol: float = 1e-10,
) -> tuple[np.ndarray, int]:
    """Power iteration for the top eigenvector of ``M M^T``.

    Starts from the normalised all-ones vector unless ``start`` is given.
    Whichever of ``M M^T`` and ``M^T M`` is smaller is formed explicitly;
    both produce the iterates ``(M M^T)^k v0``.

    Returns the unit vector and the number of iterations used.
    """
    p, m = M.shape
    if start is None:
        v0 = np.ones(p) / math.sqrt(p)
    else:
        v0 = np.asarray(start, dtype=np.float64)
        v0 = v0 / np.linalg.norm(v0)
    scale = np.linalg.norm(M)
    if scale == 0:
        return v0, 0
    u = M.T @ v0
    if np.linalg.norm(u) <= 1e-12 * scale:
        # start is (numerically) orthogonal to the row space
        v0 = v0.copy()
        v0[0] += 1e-6
        v0 /= np.linalg.norm(v0)
        u = M.T @ v0

    small_left = p <= m
    G = M @ M.T if small_left else M.T @ M
    x = v0 if small_left else u / np.linalg.norm(u)
    eig = 0.0
    it = 0
    for it in range(1, max_iter + 1):
        y = G @ x
        new_eig = float(np.linalg.norm(y))
        if new_eig == 0:
            break
        x = y / new_eig
        if abs(new_eig - eig) <= tol * new_eig:
            break
        eig = new_eig
    if small_left:
        return x, it
    v = M @ x
    return v / np.linalg.norm(v), it


def estimate_projection(
    T,
    lam: float,
    max_iter: int = 100,
    tol: float = 1e-8,
    config: Optional[SolverConfig] = None,
    init: Optional[np.ndarray] = None,
) -> ProjectionEstimate:
    """Estimate a sparse projection direction for the CUSUM matrix ``T``.

    Parameters
    ----------
    T : CusumMatrix or ndarray
        ``p x m`` matrix of (Miss)CUSUM statistics.
    lam : float
        Positive l1 penalty, strictly below the largest row norm of ``T``.
    max_iter, tol : int, float
        Stop once the sine of the angle between successive ``v`` iterates
        drops below ``tol``, or after ``max_iter`` sweeps. Ignored when
        ``config`` is given.
    init : ndarray, optional
        Initial ``v``; defaults to the leading left singular vector.

    Returns
    -------
    ProjectionEstimate

    Raises
    ------
    DegeneratePenalty
        If ``lam >= two_to_inf_norm(T)``, in which case the optimum is ``v = 0``.
    """
    if config is None:
        config = SolverConfig(max_iter=max_iter, tol=tol)
    M = _as_array(T)
    lam = float(lam)
    if not lam > 0 or not math.isfinite(lam):
        raise ValueError(f"penalty must be positive and finite, got {lam}")
    norm = two_to_inf_norm(M)
    if lam >= norm:
        raise DegeneratePenalty(lam, norm)

    init_iterations = 0
    if init is None:
        v, init_iterations = leading_left_singular_vector(
            M, max_iter=config.init_iter, tol=config.init_tol
        )
    else:
        v = np.asarray(init, dtype=np.float64)
        v = v / np.linalg.norm(v)

    trace = []
    converged = False
    w = None
    it = 0
    for it in range(1, config.max_iter + 1):
        u = M.T @ v
        u_norm = np.linalg.norm(u)
        a = None
        if u_norm > 0:
            w = u / u_norm
            a = M @ w
            s = soft_threshold(a, lam)
        if a is None or not s.any():
            if it > 1:
                # cannot happen once the objective is positive; guard anyway
                raise ZeroVector(lam, norm, "soft thresholding returned the zero vector")
            # Start the w-update from the heaviest row instead: there
            # ||M w||_inf equals the row norm, which exceeds lam.
            j = int(np.argmax(np.einsum("ij,ij->i", M, M)))
            w = M[j] / np.linalg.norm(M[j])
            a = M @ w
            s = soft_threshold(a, lam)
            if not s.any():
                raise ZeroVector(lam, norm, "soft thresholding returned the zero vector")
        v_new = s / np.linalg.norm(s)
        trace.append(float(v_new @ a - lam * np.abs(v_new).sum()))
        change = sin_angle_unit(v, v_new)
        v = v_new
        if change < config.tol:
            converged = True
            break

    return ProjectionEstimate(
        v_hat=v,
        w_hat=w,
        lam=lam,
        iterations=it,
        objective_trace=np.array(trace),
        converged=converged,
        init_iterations=init_iterations,
    )


def default_lambda(n: int, p: int, sigma: float, scale: float = 0.5) -> float:
    """``scale * sigma * sqrt(n log(p n))``.

    ``scale=0.5`` is the practical default; ``scale=2`` gives the
    conservative choice used in the error bounds.
    """
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    if p < 1:
        raise ValueError(f"p must be at least 1, got {p}")
    if not sigma > 0 or not math.isfinite(sigma):
        raise ValueError(f"sigma must be positive, got {sigma}")
    if not scale > 0 or not math.isfinite(scale):
        raise ValueError(f"scale must be positive, got {scale}")
    return scale * sigma * math.sqrt(n * math.log(p * n))
