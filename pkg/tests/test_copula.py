"""Tests for thresholds, binning rules and copula grid estimation/IO."""

import datetime as dt

import numpy as np
import pytest

from copulashock.copula import (
    CopulaGrid,
    equal_mass_thresholds,
    estimate_copula,
    load_copula_csv,
    rank_bins,
    save_copula_csv,
    threshold_bins,
)
from copulashock.sampling import EvaluatedSamples


def evaluated(rets, vols) -> EvaluatedSamples:
    return EvaluatedSamples(
        returns=np.asarray(rets, dtype=float),
        volatilities=np.asarray(vols, dtype=float),
    )


# -------------------------------------------------------------- thresholds


def test_equal_mass_thresholds_examples():
    got = equal_mass_thresholds([1.0, 2.0, 3.0, 4.0], 2)
    assert got.tolist() == [1.0, 2.5, 4.0]
    assert equal_mass_thresholds([3.0, 1.0, 2.0], 1).tolist() == [1.0, 3.0]


def test_equal_mass_thresholds_all_equal():
    thr = equal_mass_thresholds(np.full(20, 7.5), 4)
    assert thr.tolist() == [7.5] * 5
    # the tie rule sends every value to the first slab
    assert threshold_bins(np.full(20, 7.5), thr).tolist() == [0] * 20


def test_equal_mass_thresholds_errors():
    with pytest.raises(ValueError, match="non-empty 1-d array"):
        equal_mass_thresholds(np.array([]), 2)
    with pytest.raises(ValueError, match="m must be positive"):
        equal_mass_thresholds([1.0, 2.0], 0)
    with pytest.raises(ValueError, match="more bins than values"):
        equal_mass_thresholds([1.0, 2.0], 3)


def test_threshold_bins_edge_rules():
    thr = np.array([0.0, 1.0, 2.0, 3.0])
    vals = np.array([0.5, 1.0, 2.5, 3.0, -5.0, 99.0, 0.0])
    got = threshold_bins(vals, thr)
    # edge value joins the slab whose lower edge it matches; the maximum
    # joins the top slab; out-of-range values clamp
    assert got.tolist() == [0, 1, 2, 2, 0, 2, 0]


def test_rank_bins_stable_ties():
    got = rank_bins(np.full(10, 3.3), 5)
    assert got.tolist() == [0, 0, 1, 1, 2, 2, 3, 3, 4, 4]


def test_rank_bins_uneven_split():
    got = rank_bins(np.arange(10.0), 3)
    sizes = np.bincount(got)
    assert sizes.tolist() == [4, 3, 3]


def test_rank_bins_equal_counts_when_divisible():
    rng = np.random.default_rng(0)
    got = rank_bins(rng.normal(size=1000), 10)
    assert np.bincount(got).tolist() == [100] * 10


# ------------------------------------------------------------- estimation


def test_estimate_comonotone_is_diagonal():
    rng = np.random.default_rng(1)
    rets = rng.normal(size=1000)
    grid = estimate_copula(evaluated(rets, np.exp(rets)), m=10)
    assert np.array_equal(grid.mass, np.diag(np.full(10, 0.1)))
    assert grid.sample_count == 1000


def test_estimate_countermonotone_is_antidiagonal():
    rng = np.random.default_rng(2)
    rets = rng.normal(size=1000)
    grid = estimate_copula(evaluated(rets, np.exp(-rets)), m=10)
    assert np.array_equal(grid.mass, np.fliplr(np.diag(np.full(10, 0.1))))


def test_estimate_invariant_under_monotone_transforms():
    rng = np.random.default_rng(3)
    rets = rng.normal(size=2000)
    vols = np.exp(rng.normal(size=2000))
    base = estimate_copula(evaluated(rets, vols), m=8)
    warped = estimate_copula(evaluated(2.0 * rets + 5.0, vols**3), m=8)
    assert np.array_equal(base.mass, warped.mass)


def test_estimate_rank_marginals_near_exact():
    rng = np.random.default_rng(4)
    grid = estimate_copula(
        evaluated(rng.normal(size=50_000), rng.normal(size=50_000)), m=10
    )
    assert grid.marginal_deviation() <= 5e-17


def test_estimate_rank_marginals_bound_when_not_divisible():
    rng = np.random.default_rng(5)
    grid = estimate_copula(
        evaluated(rng.normal(size=1005), rng.normal(size=1005)), m=10
    )
    assert grid.marginal_deviation() <= 1.0 / 1005 + 1e-15


def test_estimate_threshold_marginals_close():
    rng = np.random.default_rng(6)
    grid = estimate_copula(
        evaluated(rng.normal(size=50_000), rng.normal(size=50_000)),
        m=10,
        binning="threshold",
    )
    assert grid.marginal_deviation() < 0.003


def test_estimate_argument_errors():
    rng = np.random.default_rng(7)
    ev = evaluated(rng.normal(size=99), rng.normal(size=99))
    with pytest.raises(ValueError, match=r"need at least m\*m=100 samples"):
        estimate_copula(ev, m=10)
    ok = evaluated(rng.normal(size=400), rng.normal(size=400))
    with pytest.raises(ValueError, match="unknown binning mode 'midpoint'"):
        estimate_copula(ok, m=10, binning="midpoint")


def test_estimate_carries_window_end():
    rng = np.random.default_rng(8)
    ev = evaluated(rng.normal(size=200), rng.normal(size=200))
    day = dt.date(2021, 6, 30)
    assert estimate_copula(ev, m=4, window_end=day).window_end == day


# ------------------------------------------------------------- validation


def test_grid_validation_errors():
    ones = np.full((3, 3), 1.0 / 9.0)
    with pytest.raises(ValueError, match="grid resolution m must be at least 2"):
        CopulaGrid(1, np.ones((1, 1)), None, None, 0)
    with pytest.raises(ValueError, match="mass grid shape does not match m"):
        CopulaGrid(4, ones, None, None, 0)
    bad = ones.copy()
    bad[0, 0] = -bad[0, 0]
    with pytest.raises(ValueError, match="mass grid must be nonnegative"):
        CopulaGrid(3, bad, None, None, 0)
    with pytest.raises(ValueError, match="mass grid must sum to 1"):
        CopulaGrid(3, ones * 2.0, None, None, 0)
    with pytest.raises(ValueError, match="ret_thresholds must have m\\+1 entries"):
        CopulaGrid(3, ones, np.zeros(3), None, 0)
    with pytest.raises(ValueError, match="vol_thresholds must be nondecreasing"):
        CopulaGrid(3, ones, None, np.array([0.0, 1.0, 0.5, 2.0]), 0)


def test_from_mass_placeholder_edges():
    grid = CopulaGrid.from_mass(np.full((4, 4), 1.0 / 16.0))
    assert grid.m == 4
    assert grid.ret_thresholds.tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert grid.sample_count == 0


# -------------------------------------------------------------------- io


def test_copula_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(9)
    ev = evaluated(rng.normal(size=730), np.exp(rng.normal(size=730)))
    grid = estimate_copula(ev, m=5, window_end=dt.date(2020, 3, 2))
    path = tmp_path / "c.csv"
    save_copula_csv(grid, path)
    got = load_copula_csv(path)
    assert got.m == grid.m
    assert got.sample_count == grid.sample_count
    assert got.window_end == grid.window_end
    assert np.array_equal(got.mass, grid.mass)
    assert np.array_equal(got.ret_thresholds, grid.ret_thresholds)
    assert np.array_equal(got.vol_thresholds, grid.vol_thresholds)


def test_copula_csv_bytes_stable(tmp_path):
    grid = CopulaGrid.from_mass(np.full((3, 3), 1.0 / 9.0))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    save_copula_csv(grid, a)
    save_copula_csv(grid, b)
    assert a.read_bytes() == b.read_bytes()


def test_copula_csv_none_thresholds_roundtrip(tmp_path):
    grid = CopulaGrid(
        m=3,
        mass=np.full((3, 3), 1.0 / 9.0),
        ret_thresholds=None,
        vol_thresholds=None,
        sample_count=0,
    )
    path = tmp_path / "p.csv"
    save_copula_csv(grid, path)
    got = load_copula_csv(path)
    assert got.ret_thresholds is None
    assert got.vol_thresholds is None
    assert got.window_end is None


def test_copula_csv_load_errors(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("0.5,0.5\n")
    with pytest.raises(ValueError, match="missing grid header line"):
        load_copula_csv(path)
    path.write_text("# m=x samples=1 window_end=none\n")
    with pytest.raises(ValueError, match="bad grid header"):
        load_copula_csv(path)
    grid = CopulaGrid.from_mass(np.full((2, 2), 0.25))
    good = tmp_path / "good.csv"
    save_copula_csv(grid, good)
    text = good.read_text()
    short = tmp_path / "short.csv"
    short.write_text("".join(text.splitlines(keepends=True)[:-1]))
    with pytest.raises(ValueError, match="expected 5 lines, got 4"):
        load_copula_csv(short)
    junk = tmp_path / "junk.csv"
    junk.write_text(
        "".join(text.splitlines(keepends=True)[:-1]) + "not-a-threshold-row,1\n"
    )
    with pytest.raises(ValueError, match="unexpected trailing line"):
        load_copula_csv(junk)
