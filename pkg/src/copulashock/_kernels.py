"""Hot numerical kernels with numba and pure-numpy implementations.

Three kernels dominate runtime: simplex Monte Carlo draws, the fused
draw-and-evaluate loop, and the exact transport solve used by the EMD.
Each exists twice, as a numba ``@njit`` function and as a vectorised
numpy function implementing the same algorithm on the same random
stream.  The module-level names ``sample_weights``, ``sample_eval`` and
``transport`` dispatch to the numba versions when numba imports cleanly
and the environment variable ``COPULASHOCK_DISABLE_NUMBA`` is unset;
both variants stay importable so they can be compared directly (see
``benchmarks/bench_kernels.py``).

Randomness is counter based (SplitMix64): draw ``t`` of batch ``b`` is a
pure function of ``(seed, b, t)``, so results do not depend on batching,
thread count, or which implementation ran.  The integer streams of the
two paths are bit-identical; derived floats can differ by one ulp in
``log``.
"""

import os

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_U53 = 2.0 ** -53

# Samples are drawn in fixed-size batches keyed by seed ^ batch_index so
# that any contiguous slice of the stream can be regenerated in isolation.
BATCH_SIZE = 16384


def _flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in ("1", "true", "yes", "on")


NUMBA_DISABLED = _flag("COPULASHOCK_DISABLE_NUMBA")

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency
    HAS_NUMBA = False

NUMBA_ACTIVE = HAS_NUMBA and not NUMBA_DISABLED


def mix64(x: int) -> int:
    """SplitMix64 finalizer on a python int, reduced mod 2**64."""
    z = x & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return (z ^ (z >> 31)) & MASK64


def derive_substream(seed: int, index: int) -> int:
    """Decorrelated child seed for stream ``index`` of a parent seed.

    Used to give every rolling window its own independent sample stream
    while keeping the whole run reproducible from one seed.
    """
    if index < 0:
        raise ValueError("substream index must be nonnegative")
    return mix64((seed + (index + 1) * 0x9E3779B97F4A7C15) & MASK64)


# ---------------------------------------------------------------------------
# numpy path
# ---------------------------------------------------------------------------


def _exp_block_np(key: np.uint64, ndraws: int) -> np.ndarray:
    """Standard-exponential draws 0..ndraws-1 of the stream under ``key``."""
    t = np.arange(1, ndraws + 1, dtype=np.uint64)
    z = key + t * GAMMA
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    z ^= z >> _S31
    # map to (0, 1] so log never sees zero
    u = ((z >> _S11) + _ONE) * _U53
    return -np.log(u)


def sample_weights_numpy(seed: int, n: int, count: int) -> np.ndarray:
    out = np.empty((count, n))
    base = np.uint64(seed & MASK64)
    for b, lo in enumerate(range(0, count, BATCH_SIZE)):
        rows = min(BATCH_SIZE, count - lo)
        e = _exp_block_np(base ^ np.uint64(b), rows * n).reshape(rows, n)
        out[lo : lo + rows] = e / e.sum(axis=1, keepdims=True)
    return out


def sample_eval_numpy(seed, n, count, rbar, sigma):
    rets = np.empty(count)
    vols = np.empty(count)
    base = np.uint64(seed & MASK64)
    for b, lo in enumerate(range(0, count, BATCH_SIZE)):
        rows = min(BATCH_SIZE, count - lo)
        e = _exp_block_np(base ^ np.uint64(b), rows * n).reshape(rows, n)
        s = e.sum(axis=1)
        rets[lo : lo + rows] = (e @ rbar) / s
        q = np.einsum("ri,ij,rj->r", e, sigma, e, optimize=True)
        vols[lo : lo + rows] = q / (s * s)
    return rets, vols


def transport_numpy(a, b, cost, tol=1e-13, max_aug=0):
    """Exact min-cost transport between histograms ``a`` and ``b``.

    Successive shortest paths with Dijkstra on the residual network,
    using node potentials so arc reduced costs stay nonnegative.
    Returns the optimal total cost.
    """
    ns, nt = cost.shape
    n = ns + nt
    if max_aug <= 0:
        max_aug = 8 * n + 16
    supply = a.astype(np.float64).copy()
    demand = b.astype(np.float64).copy()
    flow = np.zeros((ns, nt))
    pot = np.zeros(n)
    total = float(supply.sum())
    shipped = 0.0
    naug = 0
    while shipped < total - tol * max(1.0, total):
        naug += 1
        if naug > max_aug:
            raise RuntimeError("transport solve exceeded augmentation budget")
        dist = np.full(n, np.inf)
        parent = np.full(n, -1, dtype=np.int64)
        done = np.zeros(n, dtype=bool)
        dist[:ns][supply > tol] = 0.0
        for _ in range(n):
            masked = np.where(done, np.inf, dist)
            u = int(np.argmin(masked))
            du = masked[u]
            if not np.isfinite(du):
                break
            done[u] = True
            if u < ns:
                rc = cost[u] + (pot[u] - pot[ns:])
                np.maximum(rc, 0.0, out=rc)
                nd = du + rc
                upd = ~done[ns:] & (nd < dist[ns:])
                dist[ns:][upd] = nd[upd]
                parent[ns:][upd] = u
            else:
                j = u - ns
                rc = (pot[u] - pot[:ns]) - cost[:, j]
                np.maximum(rc, 0.0, out=rc)
                nd = du + rc
                upd = ~done[:ns] & (flow[:, j] > tol) & (nd < dist[:ns])
                dist[:ns][upd] = nd[upd]
                parent[:ns][upd] = u
        sink_d = np.where(demand > tol, dist[ns:], np.inf)
        t_best = int(np.argmin(sink_d))
        if not np.isfinite(sink_d[t_best]):
            raise RuntimeError("transport: no augmenting path found")
        path = []
        v = ns + t_best
        while v != -1:
            path.append(v)
            v = parent[v]
        src = path[-1]
        delta = min(supply[src], demand[t_best])
        for idx in range(len(path) - 1):
            vv, pp = path[idx], path[idx + 1]
            if vv < ns:  # backward arc sink -> source, capped by flow
                delta = min(delta, flow[vv, pp - ns])
        for idx in range(len(path) - 1):
            vv, pp = path[idx], path[idx + 1]
            if vv >= ns:
                flow[pp, vv - ns] += delta
            else:
                flow[vv, pp - ns] -= delta
        supply[src] -= delta
        demand[t_best] -= delta
        shipped += delta
        cap = dist[ns + t_best]
        fin = np.isfinite(dist)
        pot[fin] += np.minimum(dist[fin], cap)
    return float((flow * cost).sum())


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------

if HAS_NUMBA:

    @njit(cache=True, nogil=True)
    def _weights_nb(seed, n, count, out):
        nb = (count + BATCH_SIZE - 1) // BATCH_SIZE
        for b in range(nb):
            key = seed ^ np.uint64(b)
            lo = b * BATCH_SIZE
            rows = min(BATCH_SIZE, count - lo)
            for r in range(rows):
                base = r * n
                s = 0.0
                for c in range(n):
                    z = key + np.uint64(base + c + 1) * GAMMA
                    z = (z ^ (z >> _S30)) * _M1
                    z = (z ^ (z >> _S27)) * _M2
                    z = z ^ (z >> _S31)
                    u = ((z >> _S11) + _ONE) * _U53
                    e = -np.log(u)
                    out[lo + r, c] = e
                    s += e
                for c in range(n):
                    out[lo + r, c] = out[lo + r, c] / s

    @njit(cache=True, nogil=True)
    def _eval_nb(seed, n, count, rbar, sigma, rets, vols):
        g = np.empty(n)
        nb = (count + BATCH_SIZE - 1) // BATCH_SIZE
        for b in range(nb):
            key = seed ^ np.uint64(b)
            lo = b * BATCH_SIZE
            rows = min(BATCH_SIZE, count - lo)
            for r in range(rows):
                base = r * n
                s = 0.0
                for c in range(n):
                    z = key + np.uint64(base + c + 1) * GAMMA
                    z = (z ^ (z >> _S30)) * _M1
                    z = (z ^ (z >> _S27)) * _M2
                    z = z ^ (z >> _S31)
                    u = ((z >> _S11) + _ONE) * _U53
                    e = -np.log(u)
                    g[c] = e
                    s += e
                ret = 0.0
                for c in range(n):
                    ret += rbar[c] * g[c]
                # sigma is symmetric: fold the off-diagonal terms
                q = 0.0
                for c in range(n):
                    gc = g[c]
                    q += sigma[c, c] * gc * gc
                    acc = 0.0
                    for d in range(c + 1, n):
                        acc += sigma[c, d] * g[d]
                    q += 2.0 * gc * acc
                rets[lo + r] = ret / s
                vols[lo + r] = q / (s * s)

    @njit(cache=True, nogil=True)
    def _transport_nb(a, b, cost, tol, max_aug):
        ns = a.shape[0]
        nt = b.shape[0]
        n = ns + nt
        supply = a.copy()
        demand = b.copy()
        flow = np.zeros((ns, nt))
        pot = np.zeros(n)
        dist = np.empty(n)
        parent = np.empty(n, dtype=np.int64)
        done = np.empty(n, dtype=np.bool_)
        path = np.empty(n, dtype=np.int64)
        total = 0.0
        for i in range(ns):
            total += supply[i]
        shipped = 0.0
        budget = tol * max(1.0, total)
        naug = 0
        while shipped < total - budget:
            naug += 1
            if naug > max_aug:
                raise RuntimeError("transport solve exceeded augmentation budget")
            for v in range(n):
                dist[v] = np.inf
                parent[v] = -1
                done[v] = False
            for i in range(ns):
                if supply[i] > tol:
                    dist[i] = 0.0
            for _ in range(n):
                u = -1
                du = np.inf
                for v in range(n):
                    if not done[v] and dist[v] < du:
                        du = dist[v]
                        u = v
                if u < 0:
                    break
                done[u] = True
                if u < ns:
                    for j in range(nt):
                        if done[ns + j]:
                            continue
                        rc = cost[u, j] + (pot[u] - pot[ns + j])
                        if rc < 0.0:
                            rc = 0.0
                        nd = du + rc
                        if nd < dist[ns + j]:
                            dist[ns + j] = nd
                            parent[ns + j] = u
                else:
                    j = u - ns
                    for i in range(ns):
                        if done[i] or flow[i, j] <= tol:
                            continue
                        rc = (pot[u] - pot[i]) - cost[i, j]
                        if rc < 0.0:
                            rc = 0.0
                        nd = du + rc
                        if nd < dist[i]:
                            dist[i] = nd
                            parent[i] = u
            t_best = -1
            td = np.inf
            for j in range(nt):
                if demand[j] > tol and dist[ns + j] < td:
                    td = dist[ns + j]
                    t_best = j
            if t_best < 0:
                raise RuntimeError("transport: no augmenting path found")
            plen = 0
            v = ns + t_best
            while v != -1:
                path[plen] = v
                plen += 1
                v = parent[v]
            src = path[plen - 1]
            delta = supply[src]
            if demand[t_best] < delta:
                delta = demand[t_best]
            for idx in range(plen - 1):
                vv = path[idx]
                pp = path[idx + 1]
                if vv < ns:
                    f = flow[vv, pp - ns]
                    if f < delta:
                        delta = f
            for idx in range(plen - 1):
                vv = path[idx]
                pp = path[idx + 1]
                if vv >= ns:
                    flow[pp, vv - ns] += delta
                else:
                    flow[vv, pp - ns] -= delta
            supply[src] -= delta
            demand[t_best] -= delta
            shipped += delta
            cap = dist[ns + t_best]
            for v in range(n):
                if np.isfinite(dist[v]):
                    d = dist[v]
                    if d > cap:
                        d = cap
                    pot[v] += d
        out = 0.0
        for i in range(ns):
            for j in range(nt):
                out += flow[i, j] * cost[i, j]
        return out

    def sample_weights_numba(seed: int, n: int, count: int) -> np.ndarray:
        out = np.empty((count, n))
        _weights_nb(np.uint64(seed & MASK64), n, count, out)
        return out

    def sample_eval_numba(seed, n, count, rbar, sigma):
        rets = np.empty(count)
        vols = np.empty(count)
        _eval_nb(
            np.uint64(seed & MASK64),
            n,
            count,
            np.ascontiguousarray(rbar, dtype=np.float64),
            np.ascontiguousarray(sigma, dtype=np.float64),
            rets,
            vols,
        )
        return rets, vols

    def transport_numba(a, b, cost, tol=1e-13, max_aug=0):
        ns, nt = cost.shape
        if max_aug <= 0:
            max_aug = 8 * (ns + nt) + 16
        return _transport_nb(
            np.ascontiguousarray(a, dtype=np.float64),
            np.ascontiguousarray(b, dtype=np.float64),
            np.ascontiguousarray(cost, dtype=np.float64),
            tol,
            max_aug,
        )

else:  # pragma: no cover
    sample_weights_numba = None
    sample_eval_numba = None
    transport_numba = None


if NUMBA_ACTIVE:
    sample_weights = sample_weights_numba
    sample_eval = sample_eval_numba
    transport = transport_numba
else:  # pragma: no cover - exercised via COPULASHOCK_DISABLE_NUMBA subprocess tests
    sample_weights = sample_weights_numpy
    sample_eval = sample_eval_numpy
    transport = transport_numpy
