"""Numeric kernels for the clustering inner loops, in two interchangeable
backends: compiled numba routines and plain numpy.

Selection order for :func:`active_backend`: the ``FLATM_BACKEND``
environment variable (``numba``, ``numpy``, or ``auto``), defaulting to
``auto`` which prefers numba when importable. Both backends are
deterministic run-to-run for identical inputs; across backends results
agree to rounding error, not bit-for-bit, because summation orders
differ.

All kernels take C-contiguous float64 arrays. ``fuzzifier`` is the
exponent q > 1; squared distances are plain Euclidean.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["Backend", "ENV_VAR", "HAS_NUMBA", "get_backend", "active_backend"]

ENV_VAR = "FLATM_BACKEND"


def np_sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, shape (n_points, n_clusters)."""
    n, c = x.shape[0], centers.shape[0]
    d2 = np.empty((n, c))
    # Per-cluster loop keeps the temporary at (n, dims) and the einsum
    # contraction order fixed, so results do not depend on memory pressure.
    for k in range(c):
        diff = x - centers[k]
        d2[:, k] = np.einsum("nd,nd->n", diff, diff)
    return d2


def np_memberships(d2: np.ndarray, fuzzifier: float) -> np.ndarray:
    """Membership rows from squared distances.

    For point j with all distances positive:
        u_jk = (dmin_j / d2_jk)^(1/(q-1)) / sum_l (dmin_j / d2_jl)^(1/(q-1))
    which equals the reciprocal-ratio update written on unsquared
    distances, but never divides by a tiny d2. A point at distance zero
    from one or more centers splits its membership equally among those
    centers and gives the rest zero.
    """
    expo = 1.0 / (fuzzifier - 1.0)
    dmin = d2.min(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = (dmin / d2) ** expo
        u = w / w.sum(axis=1, keepdims=True)
    singular = np.flatnonzero(dmin.ravel() <= 0.0)
    if singular.size:
        hits = d2[singular] == 0.0
        u[singular] = hits / hits.sum(axis=1, keepdims=True)
    return u


def np_centers(
    x: np.ndarray, u: np.ndarray, fuzzifier: float
) -> tuple[np.ndarray, np.ndarray]:
    """Weighted centers and the per-cluster weight mass.

    center_k = sum_j u_jk^q x_j / sum_j u_jk^q. A cluster whose mass is
    exactly zero gets a zero row here; the caller decides how to recover.
    """
    um = u**fuzzifier
    wsum = um.sum(axis=0)
    centers = np.einsum("nc,nd->cd", um, x)
    safe = np.where(wsum > 0.0, wsum, 1.0)
    return centers / safe[:, None], wsum


def np_objective(d2: np.ndarray, u: np.ndarray, fuzzifier: float) -> float:
    """Weighted within-cluster scatter: sum_jk u_jk^q d2_jk."""
    return float(((u**fuzzifier) * d2).sum())


try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

if HAS_NUMBA:

    @njit(cache=True, nogil=True)
    def nb_sq_dists(x, centers):
        n, dims = x.shape
        c = centers.shape[0]
        d2 = np.empty((n, c))
        for j in range(n):
            for k in range(c):
                acc = 0.0
                for t in range(dims):
                    diff = x[j, t] - centers[k, t]
                    acc += diff * diff
                d2[j, k] = acc
        return d2

    @njit(cache=True, nogil=True)
    def nb_memberships(d2, fuzzifier):
        n, c = d2.shape
        u = np.empty((n, c))
        expo = 1.0 / (fuzzifier - 1.0)
        for j in range(n):
            dmin = d2[j, 0]
            zeros = 0
            for k in range(c):
                if d2[j, k] < dmin:
                    dmin = d2[j, k]
                if d2[j, k] == 0.0:
                    zeros += 1
            if zeros > 0:
                share = 1.0 / zeros
                for k in range(c):
                    u[j, k] = share if d2[j, k] == 0.0 else 0.0
            else:
                total = 0.0
                for k in range(c):
                    w = (dmin / d2[j, k]) ** expo
                    u[j, k] = w
                    total += w
                for k in range(c):
                    u[j, k] /= total
        return u

    @njit(cache=True, nogil=True)
    def nb_centers(x, u, fuzzifier):
        n, dims = x.shape
        c = u.shape[1]
        centers = np.zeros((c, dims))
        wsum = np.zeros(c)
        for j in range(n):
            for k in range(c):
                w = u[j, k] ** fuzzifier
                wsum[k] += w
                for t in range(dims):
                    centers[k, t] += w * x[j, t]
        for k in range(c):
            if wsum[k] > 0.0:
                for t in range(dims):
                    centers[k, t] /= wsum[k]
        return centers, wsum

    @njit(cache=True, nogil=True)
    def nb_objective(d2, u, fuzzifier):
        n, c = d2.shape
        total = 0.0
        for j in range(n):
            for k in range(c):
                total += (u[j, k] ** fuzzifier) * d2[j, k]
        return total


@dataclass(frozen=True)
class Backend:
    name: str
    sq_dists: Callable
    memberships: Callable
    centers: Callable
    objective: Callable


_NUMPY = Backend("numpy", np_sq_dists, np_memberships, np_centers, np_objective)
_NUMBA = (
    Backend("numba", nb_sq_dists, nb_memberships, nb_centers, nb_objective)
    if HAS_NUMBA
    else None
)


def get_backend(name: str = "auto") -> Backend:
    """Return a backend by name; ``auto`` prefers numba when available."""
    if name == "auto":
        return _NUMBA if _NUMBA is not None else _NUMPY
    if name == "numpy":
        return _NUMPY
    if name == "numba":
        if _NUMBA is None:
            raise RuntimeError("numba backend requested but numba is not installed")
        return _NUMBA
    raise ValueError(f"unknown backend {name!r} (expected auto, numba, or numpy)")


def active_backend() -> Backend:
    """Resolve the backend from the environment, read at call time."""
    name = os.environ.get(ENV_VAR, "auto").strip().lower() or "auto"
    return get_backend(name)
