"""Shared fixtures: kernel warmup and a regime-switching factor market."""

import datetime as dt

import numpy as np
import pytest

from copulashock import _kernels
from copulashock.data import ReturnsTable
from copulashock.indicator import window_grids
from copulashock.sampling import sample_and_eval

REGIME_CALM_DAYS = 400
REGIME_CRISIS_DAYS = 150
REGIME_SAMPLES = 100_000


def weekdays(start: dt.date, count: int) -> list:
    """First ``count`` weekdays on or after ``start``."""
    out = []
    day = start
    while len(out) < count:
        if day.weekday() < 5:
            out.append(day)
        day += dt.timedelta(days=1)
    return out


def factor_market(
    n_calm: int = REGIME_CALM_DAYS,
    n_crisis: int = REGIME_CRISIS_DAYS,
    seed: int = 2024,
    noise: float = 0.0,
) -> ReturnsTable:
    """Rank-one market: a calm regime followed by an inverted, wider one.

    Returns are ``h_t * base`` with ``base > 0``.  With no noise every
    rolling window is exactly comonotone (window mean of ``h`` positive)
    or exactly countermonotone (negative), so the crisis run produced by
    the pipeline is known in advance.  The second regime has negative
    mean and a wider spread, which inflates the window covariance.
    """
    rng = np.random.default_rng(seed)
    base = np.array([0.010, 0.006, 0.013, 0.008])
    h = np.concatenate(
        [rng.uniform(0.9, 1.1, n_calm), rng.uniform(-1.6, -0.8, n_crisis)]
    )
    values = np.outer(h, base)
    if noise > 0.0:
        values = values + noise * rng.standard_normal(values.shape)
    dates = weekdays(dt.date(2018, 1, 1), n_calm + n_crisis)
    return ReturnsTable(dates, ["a", "b", "c", "d"], values)


def write_returns_csv(path, table: ReturnsTable) -> None:
    """Serialize a table the way ``load_returns_csv`` expects it."""
    lines = ["date," + ",".join(table.assets)]
    for i, day in enumerate(table.dates):
        cells = [
            "%.17g" % v if np.isfinite(v) else "" for v in table.values[i]
        ]
        lines.append(day.isoformat() + "," + ",".join(cells))
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the jit kernels once so timed tests measure the algorithms."""
    sample_and_eval(3, 64, 0, np.array([0.01, 0.0, -0.01]), np.eye(3) * 1e-4)
    a = np.array([1.0, 0.0])
    b = np.array([0.0, 1.0])
    cost = np.array([[0.0, 1.0], [1.0, 0.0]])
    _kernels.transport(a, b, cost)


@pytest.fixture(scope="session")
def regime_market() -> ReturnsTable:
    return factor_market()


@pytest.fixture(scope="session")
def regime_grids(regime_market):
    """Window copulae of the regime market, shared by the slow tests."""
    return window_grids(
        regime_market, k=60, m=10, samples=REGIME_SAMPLES, seed=0
    )
