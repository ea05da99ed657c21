"""Spectral and medoid clustering of copula grids.

Two routes group windows by market state. The transport route turns the
EMD matrix into a Gaussian affinity, embeds its normalised form
spectrally and runs k-medoids on the embedding. The corner route skips
transport entirely and runs k-medoids on corner mass-ratio features,
with an infinity-aware metric because degenerate corners produce
infinite ratios.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .copula import CopulaGrid
from .indicator import corner_features

__all__ = [
    "ClusterAssignment",
    "distance_sigma",
    "affinity",
    "spectral_clusters",
    "kmedoids",
    "corner_feature_matrix",
    "feature_distance_matrix",
]


@dataclass(frozen=True)
class ClusterAssignment:
    """Cluster label per item plus the medoid item of each cluster."""

    labels: np.ndarray
    medoids: np.ndarray
    k: int

    def __post_init__(self):
        if len(self.medoids) != self.k:
            raise ValueError("need one medoid per cluster")


def distance_sigma(dist: np.ndarray) -> float:
    """Population standard deviation of the off-diagonal distances."""
    n = dist.shape[0]
    iu = np.triu_indices(n, k=1)
    vals = dist[iu]
    if vals.size == 0:
        raise ValueError("need at least two items")
    return float(np.std(vals))


def affinity(dist: np.ndarray) -> np.ndarray:
    """Gaussian affinity exp(-d^2 / (2 sigma^2)) with zero diagonal.

    ``sigma`` is the spread of the observed distances themselves, so the
    kernel adapts to the scale of the collection.
    """
    dist = np.asarray(dist, dtype=np.float64)
    n = dist.shape[0]
    if dist.ndim != 2 or dist.shape[1] != n:
        raise ValueError("distance matrix must be square")
    sigma = distance_sigma(dist)
    if sigma == 0.0:
        raise ValueError("all pairwise distances are equal; affinity undefined")
    out = np.exp(-(dist * dist) / (2.0 * sigma * sigma))
    np.fill_diagonal(out, 0.0)
    return out


def spectral_clusters(
    aff: np.ndarray, k: int, seed: int = 0, convention: str = "affinity-largest"
) -> ClusterAssignment:
    """Spectral embedding of an affinity matrix followed by k-medoids.

    The default convention takes the ``k`` leading eigenvectors of the
    symmetrically normalised affinity D^-1/2 A D^-1/2 and row-normalises
    them; ``laplacian-smallest`` instead takes the ``k`` trailing
    eigenvectors of the unnormalised Laplacian D - A.
    """
    aff = np.asarray(aff, dtype=np.float64)
    n = aff.shape[0]
    if not 1 <= k <= n:
        raise ValueError("cluster count must lie in [1, n]")
    deg = aff.sum(axis=1)
    bad = np.flatnonzero(deg <= 0.0)
    if bad.size:
        raise ValueError(f"item {int(bad[0])} has zero affinity to all others")
    if convention == "affinity-largest":
        dhalf = 1.0 / np.sqrt(deg)
        lap = aff * np.outer(dhalf, dhalf)
        _, vecs = scipy.linalg.eigh(lap)
        emb = vecs[:, -k:]
        norms = np.linalg.norm(emb, axis=1)
        zero = np.flatnonzero(norms == 0.0)
        if zero.size:
            raise ValueError(f"item {int(zero[0])} has a zero embedding row")
        emb = emb / norms[:, None]
    elif convention == "laplacian-smallest":
        lap = np.diag(deg) - aff
        _, vecs = scipy.linalg.eigh(lap)
        emb = vecs[:, :k]
    else:
        raise ValueError(f"unknown spectral convention {convention!r}")
    diff = emb[:, None, :] - emb[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    return kmedoids(dist, k, seed=seed, is_distance=True)


def _pairwise_from_points(points: np.ndarray) -> np.ndarray:
    n = points.shape[0]
    out = np.empty((n, n))
    for i in range(n):
        out[i] = feature_distances(points[i], points)
    np.fill_diagonal(out, 0.0)
    return out


def feature_distances(x: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Euclidean distances treating matching +inf components as equal.

    Components infinite in both vectors contribute zero; a component
    infinite in exactly one contributes an infinite distance.
    """
    with np.errstate(invalid="ignore"):  # inf - inf is masked below
        diff = points - x[None, :]
    both = np.isinf(points) & np.isinf(x)[None, :]
    diff = np.where(both, 0.0, diff)
    return np.sqrt((diff * diff).sum(axis=1))


def feature_distance_matrix(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be a 2-d array")
    return _pairwise_from_points(points)


def corner_feature_matrix(grids, corner_size: int = 3) -> np.ndarray:
    """Corner ratio features of each grid, one row per grid."""
    return np.vstack([corner_features(g, corner_size) for g in grids])


def _is_distance_like(arr: np.ndarray) -> bool:
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        return False
    if not np.allclose(np.diag(arr), 0.0):
        return False
    finite = np.isfinite(arr)
    sym_ok = np.array_equal(finite, finite.T) and np.allclose(
        arr[finite], arr.T[finite]
    )
    return sym_ok and not np.any(arr[finite] < 0.0)


def kmedoids(data, k: int, seed: int = 0, is_distance=None) -> ClusterAssignment:
    """Partitioning around medoids, deterministic greedy build plus swaps.

    ``data`` is either a precomputed distance matrix or a point array
    (auto-detected unless ``is_distance`` says); ``seed`` is accepted for
    interface stability but the build is deterministic, ties breaking
    toward the lowest index.
    """
    del seed
    data = np.asarray(data, dtype=np.float64)
    if is_distance is None:
        is_distance = _is_distance_like(data)
    dist = data if is_distance else _pairwise_from_points(data)
    n = dist.shape[0]
    if not 1 <= k <= n:
        raise ValueError("cluster count must lie in [1, n]")

    # greedy build: start from the most central item, then add the
    # candidate that shrinks total assignment cost the most
    medoids = [int(np.argmin(dist.sum(axis=1)))]
    best = dist[:, medoids[0]].copy()
    while len(medoids) < k:
        cand = np.setdiff1d(np.arange(n), medoids)
        costs = np.minimum(best[:, None], dist[:, cand]).sum(axis=0)
        pick = cand[int(np.argmin(costs))]
        medoids.append(int(pick))
        best = np.minimum(best, dist[:, pick])

    # swap phase: replace one medoid at a time while total cost drops
    medoids = np.array(sorted(medoids), dtype=np.int64)
    for _ in range(200):
        cur = dist[:, medoids].min(axis=1).sum()
        improved = False
        for pos in range(k):
            others = np.delete(medoids, pos)
            base = (
                dist[:, others].min(axis=1)
                if others.size
                else np.full(n, np.inf)
            )
            cand = np.setdiff1d(np.arange(n), medoids)
            if cand.size == 0:
                continue
            costs = np.minimum(base[:, None], dist[:, cand]).sum(axis=0)
            j = int(np.argmin(costs))
            if costs[j] < cur - 1e-12:
                medoids[pos] = cand[j]
                medoids = np.sort(medoids)
                improved = True
                break
        if not improved:
            break

    labels = np.argmin(dist[:, medoids], axis=1).astype(np.int64)
    labels[medoids] = np.arange(k)
    return ClusterAssignment(labels=labels, medoids=medoids, k=k)
