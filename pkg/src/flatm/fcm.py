"""Fuzzy c-means clustering.

Minimizes sum_jk u_jk^q d(x_j, v_k)^2 subject to memberships forming a
row-stochastic matrix, by alternating the closed-form center and
membership updates from a seeded random row-stochastic start. The
objective is non-increasing across iterations up to rounding; the loop
stops when the largest membership change falls to the threshold or the
iteration cap is hit.

The per-iteration arithmetic lives in :mod:`flatm._kernels` and runs on
either the numba or the numpy backend.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, TextIO

import numpy as np

from ._kernels import active_backend

__all__ = [
    "FcmConfig",
    "FcmResult",
    "fcm_run",
    "initial_membership",
    "update_memberships",
    "update_centers",
    "objective",
]

logger = logging.getLogger(__name__)

_MAX_SEED = 2**64


@dataclass(frozen=True)
class FcmConfig:
    """Solver settings for one clustering run.

    ``fuzzifier`` is the membership exponent q; values near 1 give nearly
    hard assignments, larger values give softer ones. Convergence is the
    max absolute membership change falling to ``threshold``.
    """

    n_clusters: int
    fuzzifier: float = 2.0
    threshold: float = 1e-5
    max_iterations: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_clusters < 2:
            raise ValueError("n_clusters must be >= 2")
        if not self.fuzzifier > 1.0:
            raise ValueError("fuzzifier must be > 1")
        if not self.threshold > 0.0:
            raise ValueError("threshold must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 <= int(self.seed) < _MAX_SEED:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class FcmResult:
    """Outcome of :func:`fcm_run`.

    ``membership`` has shape (n_points, n_clusters) with rows summing to
    1; ``objective_trace`` holds the objective after each completed
    iteration; ``converged`` is False when the iteration cap stopped the
    loop first.
    """

    membership: np.ndarray
    centers: np.ndarray
    objective_trace: tuple[float, ...]
    iterations: int
    converged: bool


def _check_data(data: np.ndarray, n_clusters: int) -> np.ndarray:
    x = np.ascontiguousarray(np.asarray(data, dtype=np.float64))
    if x.ndim != 2:
        raise ValueError("data must be a 2-d array")
    if not np.all(np.isfinite(x)):
        raise ValueError("data must be finite")
    if x.shape[0] <= n_clusters:
        raise ValueError(
            f"need more points than clusters: {x.shape[0]} points, "
            f"{n_clusters} clusters"
        )
    return x


def initial_membership(
    n_points: int, n_clusters: int, rng: np.random.Generator
) -> np.ndarray:
    """Random row-stochastic membership matrix."""
    u = rng.random((n_points, n_clusters))
    return u / u.sum(axis=1, keepdims=True)


def _fix_degenerate(
    centers: np.ndarray,
    wsum: np.ndarray,
    x: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    # A cluster with zero total membership mass has no defined center;
    # restart it at a random data point rather than dividing by zero.
    for k in np.flatnonzero(wsum == 0.0):
        j = int(rng.integers(x.shape[0]))
        centers[k] = x[j]
        logger.warning(
            "cluster %d lost all membership mass; re-seeded at data point %d", k, j
        )
    return centers


def update_memberships(
    data: np.ndarray, centers: np.ndarray, fuzzifier: float
) -> np.ndarray:
    """One membership update against fixed centers."""
    x = np.ascontiguousarray(np.asarray(data, dtype=np.float64))
    v = np.ascontiguousarray(np.asarray(centers, dtype=np.float64))
    backend = active_backend()
    return backend.memberships(backend.sq_dists(x, v), fuzzifier)


def update_centers(
    data: np.ndarray,
    membership: np.ndarray,
    fuzzifier: float,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """One center update against fixed memberships."""
    x = np.ascontiguousarray(np.asarray(data, dtype=np.float64))
    u = np.ascontiguousarray(np.asarray(membership, dtype=np.float64))
    centers, wsum = active_backend().centers(x, u, fuzzifier)
    if rng is None:
        rng = np.random.default_rng(0)
    return _fix_degenerate(centers, wsum, x, rng)


def objective(
    data: np.ndarray,
    membership: np.ndarray,
    centers: np.ndarray,
    fuzzifier: float,
) -> float:
    """Weighted within-cluster scatter for the given state."""
    x = np.ascontiguousarray(np.asarray(data, dtype=np.float64))
    u = np.ascontiguousarray(np.asarray(membership, dtype=np.float64))
    v = np.ascontiguousarray(np.asarray(centers, dtype=np.float64))
    backend = active_backend()
    return float(backend.objective(backend.sq_dists(x, v), u, fuzzifier))


def fcm_run(
    data: np.ndarray,
    config: FcmConfig,
    on_iteration: Callable[[int, np.ndarray, np.ndarray, float, float], None]
    | None = None,
    diagnostics: TextIO | None = None,
) -> FcmResult:
    """Run the full alternating loop.

    ``on_iteration(iteration, membership, centers, objective, max_delta)``
    is called after each completed iteration; ``diagnostics`` receives the
    same numbers as TSV rows. Results are a pure function of ``data`` and
    ``config`` for a fixed backend.
    """
    x = _check_data(data, config.n_clusters)
    backend = active_backend()
    rng = np.random.default_rng(config.seed)
    u = initial_membership(x.shape[0], config.n_clusters, rng)
    if diagnostics is not None:
        diagnostics.write("iteration\tobjective\tmax-delta-mu\n")
    trace: list[float] = []
    centers = np.zeros((config.n_clusters, x.shape[1]))
    converged = False
    iterations = 0
    for iteration in range(1, config.max_iterations + 1):
        centers, wsum = backend.centers(x, u, config.fuzzifier)
        centers = _fix_degenerate(centers, wsum, x, rng)
        d2 = backend.sq_dists(x, centers)
        u_new = backend.memberships(d2, config.fuzzifier)
        max_delta = float(np.abs(u_new - u).max())
        value = float(backend.objective(d2, u_new, config.fuzzifier))
        trace.append(value)
        u = u_new
        iterations = iteration
        if on_iteration is not None:
            on_iteration(iteration, u, centers, value, max_delta)
        if diagnostics is not None:
            diagnostics.write(f"{iteration}\t{value!r}\t{max_delta!r}\n")
        if max_delta <= config.threshold:
            converged = True
            break
    return FcmResult(
        membership=u,
        centers=centers,
        objective_trace=tuple(trace),
        iterations=iterations,
        converged=converged,
    )
