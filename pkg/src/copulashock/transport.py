"""Earth mover's distance between copula grids.

Grids live on a common m x m lattice, so the ground distance between
cells is the Euclidean distance between cell centres ((i+0.5)/m,
(j+0.5)/m) in the unit square. The transport problem is solved exactly
by the successive-shortest-paths kernel; zero-mass cells are pruned
first, and argument order is canonicalised so the distance is exactly
symmetric.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _kernels
from .copula import CopulaGrid

__all__ = [
    "ground_distance_matrix",
    "transport_cost",
    "emd",
    "distance_matrix",
    "SOLVE_COUNT",
]

# incremented once per emd() call; lets tests pin down how many solves a
# distance matrix really ran
SOLVE_COUNT = 0

_cost_cache = {}


def ground_distance_matrix(m: int) -> np.ndarray:
    """Euclidean distances between the m*m cell centres, row-major."""
    if m not in _cost_cache:
        i = np.arange(m, dtype=np.float64)
        ci = np.repeat(i, m)
        cj = np.tile(i, m)
        dx = (ci[:, None] - ci[None, :]) / m
        dy = (cj[:, None] - cj[None, :]) / m
        _cost_cache[m] = np.sqrt(dx * dx + dy * dy)
    return _cost_cache[m]


def transport_cost(a, b, cost) -> float:
    """Exact min-cost transport between two weight vectors."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    return _kernels.transport(a, b, np.ascontiguousarray(cost, dtype=np.float64))


def _as_mass(g) -> np.ndarray:
    return g.mass if isinstance(g, CopulaGrid) else np.asarray(g, dtype=np.float64)


def emd(a, b) -> float:
    """Earth mover's distance between two same-resolution grids."""
    global SOLVE_COUNT
    am = _as_mass(a)
    bm = _as_mass(b)
    if am.shape != bm.shape:
        raise ValueError("grids must share one resolution")
    m = am.shape[0]
    av = am.ravel()
    bv = bm.ravel()
    for name, v in (("first", av), ("second", bv)):
        s = float(v.sum())
        if abs(s - 1.0) > 1e-9:
            raise ValueError(f"{name} grid mass sums to {s!r}, expected 1")
    av = av / av.sum()
    bv = bv / bv.sum()
    # canonical order makes emd(a, b) and emd(b, a) bit-identical
    if bv.tobytes() < av.tobytes():
        av, bv = bv, av
    cost = ground_distance_matrix(m)
    ia = np.flatnonzero(av > 0.0)
    ib = np.flatnonzero(bv > 0.0)
    SOLVE_COUNT += 1
    return transport_cost(av[ia], bv[ib], cost[np.ix_(ia, ib)])


def distance_matrix(grids, workers: int = 1, progress=None) -> np.ndarray:
    """Symmetric EMD matrix over a grid collection.

    Runs exactly n*(n-1)/2 solves; the diagonal is zero by construction.
    """
    n = len(grids)
    masses = [_as_mass(g) for g in grids]
    for g in masses[1:]:
        if g.shape != masses[0].shape:
            raise ValueError("all grids must share one resolution")
    out = np.zeros((n, n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]

    def one(pair):
        i, j = pair
        return emd(masses[i], masses[j])

    if workers <= 1:
        for idx, (i, j) in enumerate(pairs):
            out[i, j] = out[j, i] = one((i, j))
            if progress is not None:
                progress(idx + 1, len(pairs))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for idx, d in enumerate(pool.map(one, pairs)):
                i, j = pairs[idx]
                out[i, j] = out[j, i] = d
                if progress is not None:
                    progress(idx + 1, len(pairs))
    return out
