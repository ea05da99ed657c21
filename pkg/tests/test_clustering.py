"""Tests for the affinity kernel, spectral embedding and k-medoids."""

import itertools

import numpy as np
import pytest

from copulashock.clustering import (
    affinity,
    corner_feature_matrix,
    distance_sigma,
    feature_distance_matrix,
    feature_distances,
    kmedoids,
    spectral_clusters,
)
from copulashock.copula import CopulaGrid
from copulashock.indicator import corner_features
from copulashock.transport import distance_matrix


def partition_of(labels):
    groups = {}
    for i, lab in enumerate(labels):
        groups.setdefault(lab, set()).add(i)
    return frozenset(frozenset(g) for g in groups.values())


def adjusted_rand_index(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    table = np.zeros((a.max() + 1, b.max() + 1))
    for x, y in zip(a, b):
        table[x, y] += 1

    def comb2(x):
        return (x * (x - 1) / 2.0).sum()

    sum_ij = comb2(table)
    sum_a = comb2(table.sum(axis=1))
    sum_b = comb2(table.sum(axis=0))
    total = a.size * (a.size - 1) / 2.0
    expected = sum_a * sum_b / total
    return (sum_ij - expected) / ((sum_a + sum_b) / 2.0 - expected)


def block_distance(sizes, near=0.1, far=5.0):
    n = sum(sizes)
    dist = np.full((n, n), far)
    start = 0
    for size in sizes:
        dist[start : start + size, start : start + size] = near
        start += size
    np.fill_diagonal(dist, 0.0)
    return dist


# --------------------------------------------------------------- affinity


def test_affinity_analytic_kernel_value():
    # distances {1, 1, 2.5} have population std sqrt(2)/2, so the unit
    # distance maps to exp(-1)
    dist = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 2.5], [1.0, 2.5, 0.0]])
    assert distance_sigma(dist) == pytest.approx(np.sqrt(2.0) / 2.0, rel=1e-15)
    aff = affinity(dist)
    assert aff[0, 1] == pytest.approx(np.exp(-1.0), rel=1e-12)
    assert np.array_equal(aff, aff.T)
    assert np.all(np.diag(aff) == 0.0)


def test_affinity_zero_distance_pair():
    dist = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
    assert affinity(dist)[0, 1] == 1.0


def test_affinity_errors():
    with pytest.raises(ValueError, match="need at least two items"):
        distance_sigma(np.zeros((1, 1)))
    with pytest.raises(ValueError, match="distance matrix must be square"):
        affinity(np.zeros((2, 3)))
    same = np.full((3, 3), 2.0)
    np.fill_diagonal(same, 0.0)
    with pytest.raises(ValueError, match="all pairwise distances are equal"):
        affinity(same)


# --------------------------------------------------------------- spectral


def test_spectral_recovers_blocks():
    dist = block_distance([4, 4])
    labels = spectral_clusters(affinity(dist), 2).labels
    assert partition_of(labels) == partition_of([0, 0, 0, 0, 1, 1, 1, 1])


def test_spectral_three_blocks():
    dist = block_distance([3, 4, 3])
    labels = spectral_clusters(affinity(dist), 3).labels
    assert partition_of(labels) == partition_of([0, 0, 0, 1, 1, 1, 1, 2, 2, 2])


def test_spectral_laplacian_convention():
    dist = block_distance([4, 4])
    labels = spectral_clusters(
        affinity(dist), 2, convention="laplacian-smallest"
    ).labels
    assert partition_of(labels) == partition_of([0, 0, 0, 0, 1, 1, 1, 1])


def test_spectral_singletons_when_k_equals_n():
    dist = block_distance([2, 2, 2])
    labels = spectral_clusters(affinity(dist), 6).labels
    assert sorted(labels) == list(range(6))


def test_spectral_errors():
    aff = affinity(block_distance([2, 2]))
    with pytest.raises(ValueError, match=r"cluster count must lie in \[1, n\]"):
        spectral_clusters(aff, 0)
    with pytest.raises(ValueError, match=r"cluster count must lie in \[1, n\]"):
        spectral_clusters(aff, 5)
    with pytest.raises(ValueError, match="unknown spectral convention"):
        spectral_clusters(aff, 2, convention="rows-first")
    dead = aff.copy()
    dead[2, :] = 0.0
    dead[:, 2] = 0.0
    with pytest.raises(ValueError, match="item 2 has zero affinity to all others"):
        spectral_clusters(dead, 2)


def test_spectral_on_emd_distances():
    rng = np.random.default_rng(21)
    base_a = np.diag(np.full(5, 0.2))
    base_b = np.fliplr(np.diag(np.full(5, 0.2)))
    grids = []
    for base in (base_a, base_b):
        for _ in range(3):
            mass = 0.9 * base + 0.1 * (rng.random((5, 5)) + 0.1)
            grids.append(mass / mass.sum())
    labels = spectral_clusters(affinity(distance_matrix(grids)), 2).labels
    assert partition_of(labels) == partition_of([0, 0, 0, 1, 1, 1])


# --------------------------------------------------------------- kmedoids


def test_kmedoids_line_oracle():
    points = np.array([[0.0], [0.1], [10.0], [10.1]])
    got = kmedoids(points, 2)
    assert partition_of(got.labels) == partition_of([0, 0, 1, 1])
    assert got.labels[got.medoids].tolist() == [0, 1]

    # exhaustive enumeration over medoid pairs
    dist = feature_distance_matrix(points)
    best = min(
        dist[:, list(pair)].min(axis=1).sum()
        for pair in itertools.combinations(range(4), 2)
    )
    cost = dist[:, got.medoids].min(axis=1).sum()
    assert cost == pytest.approx(best, abs=1e-15)


def test_kmedoids_k_one_picks_most_central():
    rng = np.random.default_rng(13)
    points = rng.normal(size=(12, 3))
    dist = feature_distance_matrix(points)
    got = kmedoids(points, 1)
    assert got.medoids[0] == int(np.argmin(dist.sum(axis=1)))
    assert np.all(got.labels == 0)


def test_kmedoids_k_equals_n():
    points = np.array([[0.0], [1.0], [2.0]])
    got = kmedoids(points, 3)
    assert sorted(got.medoids.tolist()) == [0, 1, 2]
    assert sorted(got.labels.tolist()) == [0, 1, 2]


def test_kmedoids_shuffle_invariance():
    rng = np.random.default_rng(14)
    points = np.vstack([rng.normal(0, 0.2, (6, 2)), rng.normal(4, 0.2, (6, 2))])
    base = kmedoids(points, 2)
    perm = rng.permutation(12)
    shuffled = kmedoids(points[perm], 2)
    assert adjusted_rand_index(base.labels[perm], shuffled.labels) == 1.0


def test_kmedoids_accepts_distance_matrix():
    points = np.array([[0.0], [0.1], [10.0], [10.1]])
    dist = feature_distance_matrix(points)
    explicit = kmedoids(dist, 2, is_distance=True)
    detected = kmedoids(dist, 2)
    assert partition_of(explicit.labels) == partition_of([0, 0, 1, 1])
    assert np.array_equal(explicit.labels, detected.labels)


def test_kmedoids_k_bounds():
    points = np.zeros((3, 2))
    with pytest.raises(ValueError, match=r"cluster count must lie in \[1, n\]"):
        kmedoids(points, 0)
    with pytest.raises(ValueError, match=r"cluster count must lie in \[1, n\]"):
        kmedoids(points, 4)


# ------------------------------------------------------- feature distances


def test_feature_distance_handles_infinities():
    points = np.array([[np.inf, 0.0], [np.inf, 0.1], [0.0, 5.0], [0.0, 5.1]])
    dist = feature_distance_matrix(points)
    # matching infinite components contribute nothing; mismatched ones
    # dominate everything
    assert dist[0, 1] == pytest.approx(0.1, rel=1e-12)
    assert np.isinf(dist[0, 2])
    got = kmedoids(points, 2)
    assert partition_of(got.labels) == partition_of([0, 0, 1, 1])


def test_feature_distances_vector_form():
    points = np.array([[0.0, 0.0], [3.0, 4.0]])
    got = feature_distances(np.array([0.0, 0.0]), points)
    assert got.tolist() == [0.0, 5.0]


def test_feature_distance_matrix_requires_2d():
    with pytest.raises(ValueError, match="points must be a 2-d array"):
        feature_distance_matrix(np.zeros(4))


def test_corner_feature_matrix_rows():
    rng = np.random.default_rng(15)
    grids = []
    for _ in range(4):
        mass = rng.random((10, 10)) + 0.01
        grids.append(CopulaGrid.from_mass(mass / mass.sum()))
    feats = corner_feature_matrix(grids)
    assert feats.shape == (4, 6)
    for row, grid in zip(feats, grids):
        assert np.array_equal(row, corner_features(grid.mass))
