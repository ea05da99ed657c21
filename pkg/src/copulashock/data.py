"""Market data loading and rolling-window preparation.

A market is a rectangular table: one row per trading day, one column per
asset, cells holding simple returns (or close prices before conversion).
Assets may list before their first trading day or after their last one;
those cells are empty. Gaps inside an asset's active span are rejected,
so every rolling window can safely select the assets that were live for
the whole window.
"""

import csv
import math
from dataclasses import dataclass, field
from datetime import date, datetime

import numpy as np


@dataclass
class ReturnsTable:
    """Daily observations for a set of assets; NaN marks absent data."""

    dates: list
    assets: list
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.dates), len(self.assets)):
            raise ValueError("values shape does not match dates x assets")
        for i in range(1, len(self.dates)):
            if self.dates[i] <= self.dates[i - 1]:
                raise ValueError(
                    f"dates must be strictly increasing: {self.dates[i]} "
                    f"follows {self.dates[i - 1]}"
                )
        if len(set(self.assets)) != len(self.assets):
            raise ValueError("asset names must be unique")
        for name in self.assets:
            if not name:
                raise ValueError("asset names must be non-empty")
        self._check_spans()

    def _check_spans(self):
        # interior NaN (between first and last observation of an asset)
        # would silently corrupt window statistics
        for j, name in enumerate(self.assets):
            col = self.values[:, j]
            obs = np.flatnonzero(~np.isnan(col))
            if obs.size == 0:
                continue
            span = col[obs[0] : obs[-1] + 1]
            bad = np.flatnonzero(np.isnan(span))
            if bad.size:
                when = self.dates[obs[0] + int(bad[0])]
                raise ValueError(
                    f"asset {name!r} has a gap inside its active span at {when}"
                )

    @property
    def n_rows(self) -> int:
        return len(self.dates)

    @property
    def n_assets(self) -> int:
        return len(self.assets)


@dataclass(frozen=True)
class Window:
    """A view of ``k`` consecutive rows restricted to fully-active assets."""

    assets: tuple
    dates: tuple
    values: np.ndarray = field(repr=False)

    @property
    def end_date(self):
        return self.dates[-1]

    @property
    def start_date(self):
        return self.dates[0]


@dataclass(frozen=True)
class WindowMoments:
    """Mean vector and sample covariance of one window."""

    mean: np.ndarray
    cov: np.ndarray
    window_end: date
    assets: tuple


def _parse_date(text: str, date_format: str) -> date:
    if date_format == "%Y-%m-%d":
        return date.fromisoformat(text)
    return datetime.strptime(text, date_format).date()


def load_returns_csv(path, date_format: str = "%Y-%m-%d") -> ReturnsTable:
    """Read a market table from CSV.

    Expected layout: header ``date,<asset>,...``, then one row per day
    with a date (parsed by ``date_format``) and one numeric (or empty)
    cell per asset. Rows may arrive in any order; the result is sorted
    by date.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if len(header) < 2:
            raise ValueError(f"{path}: header must name at least one asset")
        if header[0].strip().lower() != "date":
            raise ValueError(f"{path}: first header column must be 'date'")
        assets = [h.strip() for h in header[1:]]

        dates = []
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise ValueError(
                    f"{path}: line {lineno}: expected {len(header)} fields, "
                    f"got {len(row)}"
                )
            try:
                d = _parse_date(row[0].strip(), date_format)
            except ValueError:
                raise ValueError(
                    f"{path}: line {lineno}: bad date {row[0]!r}"
                ) from None
            vals = np.empty(len(assets))
            for j, cell in enumerate(row[1:]):
                cell = cell.strip()
                if not cell:
                    vals[j] = np.nan
                    continue
                try:
                    vals[j] = float(cell)
                except ValueError:
                    raise ValueError(
                        f"{path}: line {lineno}: bad value {cell!r} "
                        f"for asset {assets[j]!r}"
                    ) from None
                if math.isinf(vals[j]):
                    raise ValueError(
                        f"{path}: line {lineno}: non-finite value for "
                        f"asset {assets[j]!r}"
                    )
            dates.append(d)
            rows.append(vals)

    if len(rows) < 2:
        raise ValueError(f"{path}: need at least two data rows")
    seen = {}
    for d in dates:
        if d in seen:
            raise ValueError(f"{path}: duplicate date {d}")
        seen[d] = True
    order = sorted(range(len(dates)), key=lambda i: dates[i])
    return ReturnsTable(
        [dates[i] for i in order], assets, np.vstack([rows[i] for i in order])
    )


def prices_to_returns(prices: ReturnsTable) -> ReturnsTable:
    """Convert close prices to simple returns, dropping the first day.

    A return cell is defined only where the price is present on both the
    day and the day before.
    """
    p = prices.values
    for j, name in enumerate(prices.assets):
        col = p[:, j]
        bad = np.flatnonzero(~np.isnan(col) & (col <= 0.0))
        if bad.size:
            raise ValueError(
                f"asset {name!r} has nonpositive price on "
                f"{prices.dates[int(bad[0])]}"
            )
    rets = p[1:] / p[:-1] - 1.0
    both = ~np.isnan(p[1:]) & ~np.isnan(p[:-1])
    rets[~both] = np.nan
    return ReturnsTable(prices.dates[1:], list(prices.assets), rets)


def rolling_windows(table: ReturnsTable, k: int) -> list:
    """All length-``k`` windows, step one day, oldest first.

    Each window keeps only the assets observed on every one of its days.
    """
    if k < 2:
        raise ValueError("window length must be at least 2")
    if k > table.n_rows:
        raise ValueError(
            f"window length {k} exceeds table length {table.n_rows}"
        )
    out = []
    finite = ~np.isnan(table.values)
    # rolling all-finite test per asset via cumulative counts
    csum = np.zeros((table.n_rows + 1, table.n_assets), dtype=np.int64)
    np.cumsum(finite, axis=0, out=csum[1:])
    for t in range(table.n_rows - k + 1):
        active = np.flatnonzero(csum[t + k] - csum[t] == k)
        out.append(
            Window(
                assets=tuple(table.assets[j] for j in active),
                dates=tuple(table.dates[t : t + k]),
                values=table.values[t : t + k][:, active].copy(),
            )
        )
    return out


def window_moments(window: Window) -> WindowMoments:
    """Mean vector and (k-1)-normalised covariance of one window."""
    vals = window.values
    k, n = vals.shape
    if n < 2:
        raise ValueError(
            f"window ending {window.end_date} has fewer than two active assets"
        )
    if k < 2:
        raise ValueError("moments need at least two rows")
    mean = vals.mean(axis=0)
    dev = vals - mean
    cov = dev.T @ dev / (k - 1)
    cov = (cov + cov.T) / 2.0
    return WindowMoments(mean=mean, cov=cov, window_end=window.end_date, assets=window.assets)
