# src/clustering/hdbscan.py
'''
HDBSCAN over the embeddings of one pulse train, with exact O(n^2) distances.

  core distances -> mutual reachability -> minimum spanning tree (Prim)
  -> single-linkage tree -> condensed tree -> excess-of-mass selection -> labels

Core distances exclude the point itself: with min_samples = k, a point's core
distance is the distance to its k-th nearest other point.
'''
from __future__ import annotations
import logging
from typing import Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from scipy.spatial.distance import cdist

from config.settings import FULL_MIN_CLUSTER_SIZE, FULL_TRAIN_LENGTH, settings
from src.models.embedder import EmbeddingSet
from src.pdw.errors import ConfigError
from src.pdw.partitions import canonicalize_labels
from src.pdw.types import NOISE

logger = logging.getLogger(__name__)

# condensed-tree rows: parent cluster, child (point or cluster), lambda = 1 / distance, child size
CONDENSED_DTYPE = np.dtype([("parent", np.int64), ("child", np.int64), ("lambda_val", np.float64), ("child_size", np.int64)])


class HdbscanConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    min_cluster_size: int = Field(default=FULL_MIN_CLUSTER_SIZE, ge=2)
    min_samples: Optional[int] = Field(default=None, ge=1)
    metric: Literal["euclidean"] = "euclidean"
    selection: Literal["eom"] = "eom"
    allow_single_cluster: bool = False

    @property
    def k(self) -> int:
        """Neighbour rank used for core distances (defaults to min_cluster_size)."""
        return self.min_samples if self.min_samples is not None else self.min_cluster_size


def hdbscan_config(**kwargs) -> HdbscanConfig:
    try:
        return HdbscanConfig(**kwargs)
    except ValidationError as e:
        raise ConfigError(f"invalid clustering config: {e}") from e


def desk_min_cluster_size(train_length: int) -> int:
    """Keep the full-scale ratio of minimum cluster size to train length; never below 5."""
    scaled = FULL_MIN_CLUSTER_SIZE * train_length / FULL_TRAIN_LENGTH
    return max(5, int(np.floor(scaled + 0.5)))


# --- density ---

def pairwise(points: np.ndarray) -> np.ndarray:
    x = np.asarray(points, dtype=np.float64)
    return cdist(x, x, metric="euclidean")


def core_distances(points: np.ndarray, k: int, distances: Optional[np.ndarray] = None) -> np.ndarray:
    d = pairwise(points) if distances is None else distances
    n = d.shape[0]
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n <= k:
        raise ValueError(f"core distances need more than k={k} points, got {n}")
    # column 0 of each sorted row is the point itself (distance 0)
    return np.partition(d, k, axis=1)[:, k]


def mutual_reachability(points: np.ndarray, core: np.ndarray, distances: Optional[np.ndarray] = None) -> np.ndarray:
    d = pairwise(points) if distances is None else distances
    return np.maximum(d, np.maximum(core[:, None], core[None, :]))


# --- spanning tree and hierarchy ---

def build_mst(mr: np.ndarray) -> np.ndarray:
    """
    Prim's algorithm from point 0; returns (n-1, 3) rows of (u, v, weight) in the
    order points join the tree. v is the point added at that step and u the point
    added just before it: merging u's and v's components in weight order yields
    the single-linkage hierarchy. Equal candidates go to the lowest index.
    """
    n = mr.shape[0]
    edges = np.zeros((max(n - 1, 0), 3), dtype=np.float64)
    remaining = np.arange(n)
    reach = np.full(n, np.inf)
    current = 0
    for i in range(n - 1):
        keep = remaining != current
        remaining = remaining[keep]
        reach = np.minimum(reach[keep], mr[current, remaining])
        j = int(np.argmin(reach))
        edges[i] = (current, remaining[j], reach[j])
        current = int(remaining[j])
    return edges


def sort_edges(edges: np.ndarray) -> np.ndarray:
    # the same sort scikit-learn's HDBSCAN applies, so equal weights merge in the same order
    return edges[np.argsort(edges[:, 2])]


def single_linkage_tree(edges: np.ndarray, n: int) -> np.ndarray:
    """
    Dendrogram in scipy linkage layout: row i merges nodes (left, right) at
    `distance` into new node n + i holding `size` points.
    """
    edges = sort_edges(edges)
    parent = np.arange(2 * n - 1, dtype=np.int64)
    size = np.ones(2 * n - 1, dtype=np.int64)

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    tree = np.zeros((len(edges), 4), dtype=np.float64)
    for i, (u, v, w) in enumerate(edges):
        a, b = find(int(u)), find(int(v))
        node = n + i
        parent[a] = parent[b] = node
        size[node] = size[a] + size[b]
        tree[i] = (a, b, w, size[node])
    if settings.debug and np.any(np.diff(tree[:, 2]) < 0):
        raise RuntimeError("single-linkage merge heights are not non-decreasing")
    return tree


def _bfs_from_hierarchy(tree: np.ndarray, root: int, n: int) -> List[int]:
    out: List[int] = []
    frontier = [root]
    while frontier:
        out.extend(frontier)
        internal = [x - n for x in frontier if x >= n]
        frontier = tree[internal, :2].astype(np.int64).ravel().tolist() if internal else []
    return out


def condense_tree(tree: np.ndarray, min_cluster_size: int) -> np.ndarray:
    """
    Walk the dendrogram from the root; a split only creates new clusters when
    both sides hold at least `min_cluster_size` points, otherwise the small side's
    points fall out of the parent at that lambda.
    """
    n = tree.shape[0] + 1
    root = 2 * n - 2
    relabel = np.zeros(root + 1, dtype=np.int64)
    relabel[root] = n
    next_label = n + 1
    ignore = np.zeros(root + 1, dtype=bool)
    rows = []

    def size_of(node: int) -> int:
        return int(tree[node - n, 3]) if node >= n else 1

    def fall_out(node: int, parent_label: int, lam: float) -> None:
        for sub in _bfs_from_hierarchy(tree, node, n):
            if sub < n:
                rows.append((parent_label, sub, lam, 1))
            ignore[sub] = True

    for node in _bfs_from_hierarchy(tree, root, n):
        if node < n or ignore[node]:
            continue
        left, right, dist, _ = tree[node - n]
        left, right = int(left), int(right)
        lam = 1.0 / dist if dist > 0.0 else np.inf
        here = int(relabel[node])
        big_left = size_of(left) >= min_cluster_size
        big_right = size_of(right) >= min_cluster_size
        if big_left and big_right:
            for child in (left, right):
                relabel[child] = next_label
                rows.append((here, next_label, lam, size_of(child)))
                next_label += 1
        elif not big_left and not big_right:
            fall_out(left, here, lam)
            fall_out(right, here, lam)
        elif not big_left:
            relabel[right] = here
            fall_out(left, here, lam)
        else:
            relabel[left] = here
            fall_out(right, here, lam)
    return np.array(rows, dtype=CONDENSED_DTYPE)


def compute_stability(condensed: np.ndarray) -> Dict[int, float]:
    """Excess of mass: sum over leaving children of (lambda_leave - lambda_birth) * size."""
    if condensed.size == 0:
        return {}
    root = int(condensed["parent"].min())
    births = {root: 0.0}
    for row in condensed:
        if row["child_size"] > 1:
            births[int(row["child"])] = float(row["lambda_val"])
    stability = {c: 0.0 for c in births}
    for row in condensed:
        p = int(row["parent"])
        stability[p] += (float(row["lambda_val"]) - births[p]) * int(row["child_size"])
    return stability


def select_clusters(condensed: np.ndarray, stability: Dict[int, float], allow_single_cluster: bool = False) -> List[int]:
    """Excess-of-mass selection; the root is a candidate only when `allow_single_cluster`."""
    if not stability:
        return []
    stability = dict(stability)
    nodes = sorted(stability, reverse=True)
    if not allow_single_cluster:
        nodes = nodes[:-1]
    clusters = condensed[condensed["child_size"] > 1]
    children: Dict[int, List[int]] = {}
    for row in clusters:
        children.setdefault(int(row["parent"]), []).append(int(row["child"]))
    selected = {c: True for c in nodes}

    def descendants(c: int) -> List[int]:
        out, frontier = [], list(children.get(c, []))
        while frontier:
            out.extend(frontier)
            frontier = [g for f in frontier for g in children.get(f, [])]
        return out

    # children carry larger ids than their parents, so descending order is bottom-up
    for node in nodes:
        subtree = sum(stability[c] for c in children.get(node, []))
        if subtree > stability[node]:
            selected[node] = False
            stability[node] = subtree
        else:
            for sub in descendants(node):
                if sub in selected:
                    selected[sub] = False
    return sorted(c for c, keep in selected.items() if keep)


def label_points(condensed: np.ndarray, clusters: List[int], n: int) -> np.ndarray:
    """Each point takes the selected cluster on its path to the root, else NOISE."""
    labels = np.full(n, NOISE, dtype=np.int64)
    if condensed.size == 0 or not clusters:
        return labels
    cluster_parent = {int(r["child"]): int(r["parent"]) for r in condensed if r["child_size"] > 1}
    point_parent = {int(r["child"]): int(r["parent"]) for r in condensed if r["child"] < n}
    index = {c: i for i, c in enumerate(clusters)}
    for p in range(n):
        c = point_parent.get(p)
        while c is not None and c not in index:
            c = cluster_parent.get(c)
        if c is not None:
            labels[p] = index[c]
    return labels


class ClusterHierarchy(BaseModel):
    """Spanning tree over mutual-reachability distances, plus the dendrogram it induces."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    n: int
    mst: np.ndarray
    single_linkage: np.ndarray


def build_hierarchy(points: np.ndarray, k: int) -> ClusterHierarchy:
    x = np.asarray(points, dtype=np.float64)
    d = pairwise(x)
    core = core_distances(x, k, distances=d)
    mst = build_mst(mutual_reachability(x, core, distances=d))
    return ClusterHierarchy(n=x.shape[0], mst=mst, single_linkage=single_linkage_tree(mst, x.shape[0]))


def condense_and_extract(hierarchy: ClusterHierarchy, config: HdbscanConfig) -> np.ndarray:
    condensed = condense_tree(hierarchy.single_linkage, config.min_cluster_size)
    stability = compute_stability(condensed)
    clusters = select_clusters(condensed, stability, config.allow_single_cluster)
    return canonicalize_labels(label_points(condensed, clusters, hierarchy.n))


def cluster_embeddings(z: Union[EmbeddingSet, np.ndarray], config: HdbscanConfig) -> np.ndarray:
    """Label every row of `z`; NOISE (-1) marks points outside the selected clusters."""
    x = np.asarray(z.embeddings if isinstance(z, EmbeddingSet) else z, dtype=np.float64)
    n = x.shape[0]
    if n <= config.k or n < config.min_cluster_size:
        return np.full(n, NOISE, dtype=np.int64)
    return condense_and_extract(build_hierarchy(x, config.k), config)
