"""Diagonal-band shock indicator and market period classification.

A comonotone copula concentrates mass on the main diagonal of the grid
(high return with high volatility), a countermonotone one on the
anti-diagonal. The indicator of a window is the mass ratio

    indicator = (anti-diagonal band mass) / (main-diagonal band mass)

with cells claimed by both bands excluded from each. Values above one
flag inverted return/volatility association; long runs of such windows
are classified as warnings or crises by run length.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import date

import numpy as np

from .copula import CopulaGrid, estimate_copula
from .data import ReturnsTable, rolling_windows, window_moments
from .sampling import derive_substream, sample_and_eval

__all__ = [
    "BandGeometry",
    "IndicatorSeries",
    "MarketPeriod",
    "band_masks",
    "indicator",
    "window_grids",
    "indicator_series",
    "classify_periods",
    "corner_block",
    "corner_features",
]

WARNING_MIN_RUN = 61
CRISIS_MIN_RUN = 100


@dataclass(frozen=True)
class BandGeometry:
    """Boolean cell masks of the two diagonal bands, overlap removed."""

    m: int
    band_fraction: float
    width: int
    up_cells: np.ndarray
    down_cells: np.ndarray


@dataclass(frozen=True)
class IndicatorSeries:
    """Indicator value per window, keyed by window end date."""

    dates: list
    values: np.ndarray

    def __post_init__(self):
        if len(self.dates) != len(self.values):
            raise ValueError("dates and values must have equal length")

    def __len__(self) -> int:
        return len(self.dates)


@dataclass(frozen=True)
class MarketPeriod:
    start: date
    end: date
    kind: str
    run_length: int


def band_masks(m: int, band_fraction: float = 0.10) -> BandGeometry:
    """Masks of the up (main) and down (anti) diagonal bands.

    Band half-width is ``round(band_fraction * m)`` cells; a cell within
    both bands belongs to neither.
    """
    if m < 2:
        raise ValueError("grid resolution m must be at least 2")
    if not 0.0 <= band_fraction < 0.5:
        raise ValueError("band fraction must lie in [0, 0.5)")
    w = int(round(band_fraction * m))
    i = np.arange(m)[:, None]
    j = np.arange(m)[None, :]
    up = np.abs(i - j) <= w
    down = np.abs(i + j - (m - 1)) <= w
    overlap = up & down
    return BandGeometry(
        m=m,
        band_fraction=band_fraction,
        width=w,
        up_cells=up & ~overlap,
        down_cells=down & ~overlap,
    )


def indicator(grid, band_fraction: float = 0.10) -> float:
    """Down-band over up-band mass ratio of one copula grid.

    Zero up-band mass with positive down-band mass gives +inf; two empty
    bands give the neutral value 1.
    """
    mass = grid.mass if isinstance(grid, CopulaGrid) else np.asarray(grid)
    bands = band_masks(mass.shape[0], band_fraction)
    up = float(mass[bands.up_cells].sum())
    down = float(mass[bands.down_cells].sum())
    if up == 0.0:
        return 1.0 if down == 0.0 else math.inf
    return down / up


def window_grids(
    table: ReturnsTable,
    k: int = 60,
    m: int = 10,
    samples: int = 500_000,
    seed: int = 0,
    binning: str = "rank",
    workers: int = 1,
    progress=None,
) -> list:
    """Copula grid of every rolling window, oldest first.

    Window ``w`` draws from substream ``derive_substream(seed, w)``, so
    results do not depend on ``workers`` or evaluation order.
    """
    windows = rolling_windows(table, k)
    moments = [window_moments(win) for win in windows]

    def one(idx: int) -> CopulaGrid:
        mom = moments[idx]
        ev = sample_and_eval(
            len(mom.assets),
            samples,
            derive_substream(seed, idx),
            mom.mean,
            mom.cov,
        )
        return estimate_copula(ev, m, binning=binning, window_end=mom.window_end)

    out = []
    if workers <= 1:
        for idx in range(len(moments)):
            out.append(one(idx))
            if progress is not None:
                progress(idx + 1, len(moments))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for idx, grid in enumerate(pool.map(one, range(len(moments)))):
                out.append(grid)
                if progress is not None:
                    progress(idx + 1, len(moments))
    return out


def indicator_series(
    table: ReturnsTable,
    k: int = 60,
    m: int = 10,
    samples: int = 500_000,
    band_fraction: float = 0.10,
    seed: int = 0,
    binning: str = "rank",
    workers: int = 1,
    progress=None,
) -> IndicatorSeries:
    """Rolling indicator over all windows of the table."""
    grids = window_grids(
        table,
        k=k,
        m=m,
        samples=samples,
        seed=seed,
        binning=binning,
        workers=workers,
        progress=progress,
    )
    values = np.array([indicator(g, band_fraction) for g in grids])
    return IndicatorSeries(dates=[g.window_end for g in grids], values=values)


def classify_periods(series: IndicatorSeries) -> list:
    """Maximal runs of indicator values above one, kept if long enough.

    Runs of at least ``CRISIS_MIN_RUN`` windows are crises; shorter runs
    down to ``WARNING_MIN_RUN`` are warnings; anything shorter is noise.
    """
    out = []
    values = series.values
    n = len(values)
    i = 0
    while i < n:
        if not values[i] > 1.0:
            i += 1
            continue
        j = i
        while j + 1 < n and values[j + 1] > 1.0:
            j += 1
        run = j - i + 1
        if run >= CRISIS_MIN_RUN:
            kind = "crisis"
        elif run >= WARNING_MIN_RUN:
            kind = "warning"
        else:
            kind = None
        if kind is not None:
            out.append(
                MarketPeriod(
                    start=series.dates[i],
                    end=series.dates[j],
                    kind=kind,
                    run_length=run,
                )
            )
        i = j + 1
    return out


_CORNERS = ("lower-left", "lower-right", "upper-left", "upper-right")


def corner_block(m: int, corner: str, side: int):
    """Row and column slices of a named corner block.

    Rows index return (left = low), columns index volatility
    (lower = low), matching the plot orientation of the grid.
    """
    if corner not in _CORNERS:
        raise ValueError(f"unknown corner {corner!r}")
    if not 1 <= side < m:
        raise ValueError("corner side must be between 1 and m - 1")
    lo = slice(0, side)
    hi = slice(m - side, m)
    rows = lo if corner.endswith("left") else hi
    cols = lo if corner.startswith("lower") else hi
    return rows, cols


def _ratio(num: float, den: float) -> float:
    if den == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / den


def corner_features(grid, corner_size: int = 3) -> np.ndarray:
    """Pairwise mass ratios of the four corner blocks.

    Order: [UL/UR, UL/LL, UL/LR, UR/LL, UR/LR, LL/LR]; a 0/0 ratio is 0,
    positive over zero is +inf.
    """
    mass = grid.mass if isinstance(grid, CopulaGrid) else np.asarray(grid)
    m = mass.shape[0]
    if 2 * corner_size > m:
        raise ValueError("corner blocks must not overlap: need 2*size <= m")
    blocks = {}
    for name, key in (
        ("UL", "upper-left"),
        ("UR", "upper-right"),
        ("LL", "lower-left"),
        ("LR", "lower-right"),
    ):
        rows, cols = corner_block(m, key, corner_size)
        blocks[name] = float(mass[rows, cols].sum())
    pairs = [
        ("UL", "UR"),
        ("UL", "LL"),
        ("UL", "LR"),
        ("UR", "LL"),
        ("UR", "LR"),
        ("LL", "LR"),
    ]
    return np.array([_ratio(blocks[a], blocks[b]) for a, b in pairs])
