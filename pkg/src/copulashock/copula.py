"""Empirical copula estimation on an equal-mass grid.

The joint distribution of (return, volatility) over a window's sampled
portfolios is summarised as an m x m histogram of rank pairs: cell
``(i, j)`` holds the fraction of samples whose return falls in return
slab ``i`` and whose volatility falls in volatility slab ``j``. Row
index is the return axis, column index the volatility axis.

Two binning modes are supported. ``rank`` bins by position in the
sorted order (ties broken by input order), which makes the marginals
exactly uniform whenever ``m`` divides the sample count. ``threshold``
bins against empirical quantile edges, which is cheaper to apply to new
values but only approximately uniform under heavy ties.
"""

from dataclasses import dataclass
from datetime import date
from typing import Optional

import numpy as np

__all__ = [
    "CopulaGrid",
    "equal_mass_thresholds",
    "estimate_copula",
    "save_copula_csv",
    "load_copula_csv",
]


@dataclass
class CopulaGrid:
    """An m x m copula mass grid plus the slab edges that produced it."""

    m: int
    mass: np.ndarray
    ret_thresholds: Optional[np.ndarray]
    vol_thresholds: Optional[np.ndarray]
    sample_count: int
    window_end: Optional[date] = None

    def __post_init__(self):
        self.mass = np.asarray(self.mass, dtype=np.float64)
        self.validate()

    def validate(self):
        if self.m < 2:
            raise ValueError("grid resolution m must be at least 2")
        if self.mass.shape != (self.m, self.m):
            raise ValueError("mass grid shape does not match m")
        if np.any(self.mass < 0.0):
            raise ValueError("mass grid must be nonnegative")
        total = float(self.mass.sum())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"mass grid must sum to 1, got {total!r}")
        for name, thr in (
            ("ret_thresholds", self.ret_thresholds),
            ("vol_thresholds", self.vol_thresholds),
        ):
            if thr is None:
                continue
            thr = np.asarray(thr, dtype=np.float64)
            if thr.shape != (self.m + 1,):
                raise ValueError(f"{name} must have m+1 entries")
            if np.any(np.diff(thr) < 0.0):
                raise ValueError(f"{name} must be nondecreasing")

    @classmethod
    def from_mass(cls, mass, window_end=None, sample_count=0):
        """Wrap a raw mass grid; thresholds get unit-interval placeholders."""
        mass = np.asarray(mass, dtype=np.float64)
        m = mass.shape[0]
        edges = np.linspace(0.0, 1.0, m + 1)
        return cls(
            m=m,
            mass=mass,
            ret_thresholds=edges,
            vol_thresholds=edges.copy(),
            sample_count=sample_count,
            window_end=window_end,
        )

    def marginal_deviation(self) -> float:
        """Largest deviation of a row or column sum from 1/m."""
        target = 1.0 / self.m
        dr = np.abs(self.mass.sum(axis=1) - target).max()
        dc = np.abs(self.mass.sum(axis=0) - target).max()
        return float(max(dr, dc))


def equal_mass_thresholds(values, m: int) -> np.ndarray:
    """Slab edges splitting ``values`` into ``m`` equal-probability bins.

    Entry 0 is the minimum, entry m the maximum, interior entries the
    linearly interpolated i/m quantiles.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("values must be a non-empty 1-d array")
    if m < 1:
        raise ValueError("m must be positive")
    if m > values.size:
        raise ValueError("more bins than values")
    qs = np.linspace(0.0, 1.0, m + 1)
    return np.quantile(values, qs)


def threshold_bins(values, thresholds) -> np.ndarray:
    """Slab index of each value under half-open edges.

    A value equal to an edge goes to the lowest slab whose lower edge it
    matches (so a degenerate run of equal edges sends ties to the first
    slab of the run); the overall maximum goes to the top slab.
    Out-of-range values clamp to the end slabs.
    """
    values = np.asarray(values, dtype=np.float64)
    thresholds = np.asarray(thresholds, dtype=np.float64)
    m = thresholds.size - 1
    j = np.searchsorted(thresholds, values, side="left")
    inside = j < thresholds.size
    on_edge = np.zeros(values.shape, dtype=bool)
    on_edge[inside] = thresholds[j[inside]] == values[inside]
    return np.where(
        on_edge, np.minimum(j, m - 1), np.clip(j - 1, 0, m - 1)
    ).astype(np.int64)


def rank_bins(values, m: int) -> np.ndarray:
    """Slab index by sorted position; stable under ties."""
    values = np.asarray(values, dtype=np.float64)
    count = values.size
    order = np.argsort(values, kind="stable")
    ranks = np.empty(count, dtype=np.int64)
    ranks[order] = np.arange(count, dtype=np.int64)
    return ranks * m // count


def estimate_copula(evaluated, m: int = 10, binning: str = "rank", window_end=None) -> "CopulaGrid":
    """Empirical copula of one evaluated sample batch."""
    rets = np.asarray(evaluated.returns, dtype=np.float64)
    vols = np.asarray(evaluated.volatilities, dtype=np.float64)
    count = rets.size
    if m < 2:
        raise ValueError("grid resolution m must be at least 2")
    if count < m * m:
        raise ValueError(
            f"need at least m*m={m * m} samples for an {m}x{m} grid, got {count}"
        )
    ret_thr = equal_mass_thresholds(rets, m)
    vol_thr = equal_mass_thresholds(vols, m)
    if binning == "rank":
        bi = rank_bins(rets, m)
        bj = rank_bins(vols, m)
    elif binning == "threshold":
        bi = threshold_bins(rets, ret_thr)
        bj = threshold_bins(vols, vol_thr)
    else:
        raise ValueError(f"unknown binning mode {binning!r}")
    counts = np.bincount(bi * m + bj, minlength=m * m).reshape(m, m)
    return CopulaGrid(
        m=m,
        mass=counts / count,
        ret_thresholds=ret_thr,
        vol_thresholds=vol_thr,
        sample_count=count,
        window_end=window_end,
    )


def _fmt(x: float) -> str:
    return "%.17g" % x


def save_copula_csv(grid: CopulaGrid, path):
    """Write a grid as CSV; text is a pure function of the grid."""
    lines = [
        "# m=%d samples=%d window_end=%s"
        % (
            grid.m,
            grid.sample_count,
            grid.window_end.isoformat() if grid.window_end else "none",
        )
    ]
    for i in range(grid.m):
        lines.append(",".join(_fmt(v) for v in grid.mass[i]))
    for name, thr in (
        ("ret_thresholds", grid.ret_thresholds),
        ("vol_thresholds", grid.vol_thresholds),
    ):
        if thr is None:
            lines.append(name + ",")
        else:
            lines.append(name + "," + ",".join(_fmt(v) for v in thr))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def load_copula_csv(path) -> CopulaGrid:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("# "):
        raise ValueError(f"{path}: missing grid header line")
    meta = {}
    for tok in lines[0][2:].split():
        key, _, val = tok.partition("=")
        meta[key] = val
    try:
        m = int(meta["m"])
        samples = int(meta["samples"])
    except (KeyError, ValueError):
        raise ValueError(f"{path}: bad grid header {lines[0]!r}") from None
    wend = meta.get("window_end", "none")
    window_end = None if wend == "none" else date.fromisoformat(wend)
    if len(lines) != 1 + m + 2:
        raise ValueError(f"{path}: expected {1 + m + 2} lines, got {len(lines)}")
    mass = np.array(
        [[float(v) for v in lines[1 + i].split(",")] for i in range(m)]
    )
    thrs = {}
    for ln in lines[1 + m :]:
        name, _, rest = ln.partition(",")
        if name not in ("ret_thresholds", "vol_thresholds"):
            raise ValueError(f"{path}: unexpected trailing line {ln!r}")
        thrs[name] = (
            None if not rest else np.array([float(v) for v in rest.split(",")])
        )
    return CopulaGrid(
        m=m,
        mass=mass,
        ret_thresholds=thrs.get("ret_thresholds"),
        vol_thresholds=thrs.get("vol_thresholds"),
        sample_count=samples,
        window_end=window_end,
    )
