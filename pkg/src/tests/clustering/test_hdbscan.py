import itertools

import numpy as np
import pytest

from src.clustering.hdbscan import (
    HdbscanConfig,
    build_hierarchy,
    build_mst,
    cluster_embeddings,
    compute_stability,
    condense_and_extract,
    condense_tree,
    core_distances,
    desk_min_cluster_size,
    hdbscan_config,
    mutual_reachability,
    pairwise,
    single_linkage_tree,
)
from src.metrics.contingency import as_partition
from src.pdw.errors import ConfigError
from src.pdw.types import NOISE


def _blobs(rng, centers, n_each, sigma):
    pts = np.concatenate([rng.normal(c, sigma, size=(n_each, len(c))) for c in centers])
    truth = np.repeat(np.arange(len(centers)), n_each)
    return pts, truth


def _kruskal_weight(w):
    n = w.shape[0]
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    total = 0.0
    for c, i, j in sorted((w[i, j], i, j) for i, j in itertools.combinations(range(n), 2)):
        a, b = find(i), find(j)
        if a != b:
            parent[a] = b
            total += c
    return total


def test_core_distances_collinear():
    pts = np.array([[0.0], [1.0], [3.0]])
    assert core_distances(pts, 1).tolist() == [1.0, 1.0, 2.0]
    assert core_distances(np.zeros((4, 2)), 2).tolist() == [0.0] * 4


@pytest.mark.parametrize("seed", range(5))
def test_core_distances_match_knn(seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(25, 3))
    k = int(rng.integers(1, 10))
    d = pairwise(pts)
    expected = [sorted(d[i, j] for j in range(25) if j != i)[k - 1] for i in range(25)]
    np.testing.assert_allclose(core_distances(pts, k), expected, rtol=0, atol=1e-12)


def test_core_distances_need_more_than_k_points():
    with pytest.raises(ValueError):
        core_distances(np.zeros((3, 2)), 3)


def test_mutual_reachability():
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(15, 2))
    d = pairwise(pts)
    assert np.array_equal(mutual_reachability(pts, np.zeros(15)), d)
    core = core_distances(pts, 3)
    mr = mutual_reachability(pts, core)
    assert np.all(mr >= d) and np.array_equal(mr, mr.T)
    i, j = 2, 9
    assert mr[i, j] == max(core[i], core[j], d[i, j])


def test_mst_on_a_path():
    pts = np.array([[0.0], [1.0], [3.0], [6.0], [10.0]])
    edges = build_mst(pairwise(pts))
    pairs = sorted(tuple(sorted((int(u), int(v)))) for u, v, _ in edges)
    assert pairs == [(0, 1), (1, 2), (2, 3), (3, 4)]


@pytest.mark.parametrize("seed", range(10))
def test_mst_weight_matches_kruskal(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 11))
    mr = mutual_reachability(rng.normal(size=(n, 2)), rng.uniform(0, 0.5, size=n))
    edges = build_mst(mr)
    assert edges.shape == (n - 1, 3)
    assert edges[:, 2].sum() == pytest.approx(_kruskal_weight(mr), rel=1e-12)
    seen = {0}
    for u, v, _ in edges.tolist():
        seen |= {int(u), int(v)}
    assert seen == set(range(n))


def test_equal_weights_join_in_prim_order():
    mr = np.ones((4, 4))
    np.fill_diagonal(mr, 0.0)
    # each step takes the lowest-index candidate and pairs it with the point added before it
    assert build_mst(mr).tolist() == [[0, 1, 1], [1, 2, 1], [2, 3, 1]]
    tree = single_linkage_tree(build_mst(mr), 4)
    assert tree[:, 2].tolist() == [1.0, 1.0, 1.0]
    assert tree[-1, 3] == 4


def test_single_linkage_heights_are_monotone():
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(40, 2))
    h = build_hierarchy(pts, 3)
    heights = h.single_linkage[:, 2]
    assert np.all(np.diff(heights) >= 0)
    assert h.single_linkage[-1, 3] == 40


def test_condensed_tree_accounting():
    rng = np.random.default_rng(3)
    pts, _ = _blobs(rng, [(0, 0), (6, 0), (0, 6)], 20, 0.4)
    tree = single_linkage_tree(build_mst(mutual_reachability(pts, core_distances(pts, 5))), 60)
    condensed = condense_tree(tree, 10)
    points = condensed[condensed["child"] < 60]
    assert sorted(points["child"].tolist()) == list(range(60))
    stability = compute_stability(condensed)
    assert all(v >= 0 for v in stability.values())
    # a cluster's size equals the sum of its children's sizes
    sizes = {int(r["child"]): int(r["child_size"]) for r in condensed if r["child_size"] > 1}
    for c, size in sizes.items():
        rows = condensed[condensed["parent"] == c]
        assert int(rows["child_size"].sum()) == size


def test_two_separated_blobs():
    rng = np.random.default_rng(4)
    pts, truth = _blobs(rng, [(0.0, 0.0), (10.0, 0.0)], 50, 0.1)
    labels = cluster_embeddings(pts, HdbscanConfig(min_cluster_size=10))
    assert np.sum(labels == NOISE) == 0
    assert as_partition(labels) == as_partition(truth)


def test_three_blobs():
    rng = np.random.default_rng(5)
    pts, truth = _blobs(rng, [(0, 0, 0), (8, 0, 0), (0, 8, 0)], 30, 0.3)
    labels = cluster_embeddings(pts, HdbscanConfig(min_cluster_size=8))
    assert len(set(labels.tolist()) - {NOISE}) == 3


def test_too_few_points_are_all_noise():
    pts = np.random.default_rng(6).normal(size=(9, 2))
    assert cluster_embeddings(pts, HdbscanConfig(min_cluster_size=10)).tolist() == [NOISE] * 9
    assert cluster_embeddings(pts, HdbscanConfig(min_cluster_size=2, min_samples=9)).tolist() == [NOISE] * 9


def test_sparse_points_without_room_for_two_clusters_are_noise():
    # 30 points cannot split into two children of 20
    pts = np.random.default_rng(7).uniform(0, 100, size=(30, 3))
    labels = cluster_embeddings(pts, HdbscanConfig(min_cluster_size=20, min_samples=15))
    assert labels.tolist() == [NOISE] * 30


@pytest.mark.parametrize("seed", range(10))
def test_cluster_invariants(seed):
    rng = np.random.default_rng(100 + seed)
    n_blobs = int(rng.integers(1, 5))
    pts, _ = _blobs(rng, rng.uniform(-5, 5, size=(n_blobs, 2)), int(rng.integers(10, 30)), 0.6)
    cfg = HdbscanConfig(min_cluster_size=int(rng.integers(3, 12)))
    labels = cluster_embeddings(pts, cfg)
    found = [c for c in set(labels.tolist()) if c != NOISE]
    assert len(found) <= len(pts) // cfg.min_cluster_size
    for c in found:
        assert np.sum(labels == c) >= cfg.min_cluster_size
    assert np.array_equal(labels, cluster_embeddings(pts, cfg))
    assert as_partition(cluster_embeddings(pts * 3.7, cfg)) == as_partition(labels)


@pytest.mark.parametrize("seed", range(10))
def test_permuted_points_give_permuted_partition(seed):
    rng = np.random.default_rng(200 + seed)
    pts, _ = _blobs(rng, rng.uniform(-5, 5, size=(int(rng.integers(1, 5)), 2)), int(rng.integers(10, 30)), 0.6)
    # with min_samples=1 mutual reachability is the plain distance, so no two merges share a height
    cfg = HdbscanConfig(min_cluster_size=int(rng.integers(3, 12)), min_samples=1)
    heights = build_hierarchy(pts, cfg.k).single_linkage[:, 2]
    assert len(np.unique(heights)) == len(heights)
    labels = cluster_embeddings(pts, cfg)
    perm = rng.permutation(len(pts))
    assert as_partition(cluster_embeddings(pts[perm], cfg)) == as_partition(labels[perm])


@pytest.mark.parametrize("seed", range(50))
def test_agrees_with_reference_implementation(seed):
    sk = pytest.importorskip("sklearn.cluster")
    rng = np.random.default_rng(1000 + seed)
    n_blobs = int(rng.integers(1, 5))
    pts, _ = _blobs(rng, rng.uniform(-6, 6, size=(n_blobs, 2)), int(rng.integers(8, 25)), float(rng.uniform(0.3, 1.2)))
    mcs = int(rng.integers(3, 10))
    k = int(rng.integers(1, 8))
    ours = cluster_embeddings(pts, HdbscanConfig(min_cluster_size=mcs, min_samples=k))
    # both sides cluster the same distance matrix; the reference counts the point itself among its neighbours
    ref = sk.HDBSCAN(min_cluster_size=mcs, min_samples=k + 1, metric="precomputed").fit(pairwise(pts)).labels_
    assert np.array_equal(ours == NOISE, ref == NOISE)
    assert as_partition(ours) == as_partition(ref)


def test_condense_and_extract_from_hierarchy():
    rng = np.random.default_rng(8)
    pts, truth = _blobs(rng, [(0, 0), (9, 9)], 25, 0.2)
    cfg = HdbscanConfig(min_cluster_size=10)
    labels = condense_and_extract(build_hierarchy(pts, cfg.k), cfg)
    assert as_partition(labels) == as_partition(truth)


def test_config_and_desk_size():
    assert HdbscanConfig().min_cluster_size == 20
    assert HdbscanConfig(min_cluster_size=7).k == 7
    with pytest.raises(ConfigError):
        hdbscan_config(min_cluster_size=1)
    with pytest.raises(ConfigError):
        hdbscan_config(min_samples=0)
    assert desk_min_cluster_size(1000) == 20
    assert desk_min_cluster_size(100) == 5
    assert desk_min_cluster_size(500) == 10
    assert desk_min_cluster_size(625) == 13
