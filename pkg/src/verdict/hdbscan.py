"""Hierarchical density-based clustering (HDBSCAN) over cosine distance.

Full pipeline: core distances at k = min_samples, mutual-reachability
graph, minimum spanning tree (Prim, O(n^2), deterministic tie-breaks),
single-linkage dendrogram, condensed tree at min_cluster_size, and
excess-of-mass stability extraction of the flat clustering. Points in no
stable cluster are noise (label -1).

Everything here is exact and single-threaded; input sizes are dozens of
candidate pairs, not millions of points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Zero distances (exact duplicates) would give infinite density; cap the
# lambda scale instead so stabilities stay finite.
_MIN_DISTANCE = 1e-12


def cosine_distance_matrix(vectors: np.ndarray) -> np.ndarray:
    """Pairwise 1 - cosine for unit-normalized row vectors, clipped to >= 0."""
    sims = vectors @ vectors.T
    dist = 1.0 - sims
    np.fill_diagonal(dist, 0.0)
    return np.maximum(dist, 0.0)


def core_distances(dist: np.ndarray, min_samples: int) -> np.ndarray:
    """Distance to each point's min_samples-th nearest other point."""
    n = dist.shape[0]
    if min_samples < 1:
        raise ValueError("min_samples must be >= 1")
    if min_samples > n - 1:
        # Degenerate small inputs: fall back to the farthest other point.
        min_samples = max(n - 1, 1)
    core = np.empty(n)
    for i in range(n):
        others = np.delete(dist[i], i)
        core[i] = np.sort(others)[min_samples - 1] if others.size else 0.0
    return core


def mutual_reachability(dist: np.ndarray, core: np.ndarray) -> np.ndarray:
    mreach = np.maximum(dist, np.maximum.outer(core, core))
    np.fill_diagonal(mreach, 0.0)
    return mreach


def prim_mst(weights: np.ndarray) -> list[tuple[int, int, float]]:
    """MST of a dense symmetric graph; ties broken by lowest node index."""
    n = weights.shape[0]
    if n == 0:
        return []
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    best_from = np.full(n, -1, dtype=int)
    in_tree[0] = True
    best[1:] = weights[0, 1:]
    best_from[1:] = 0
    edges: list[tuple[int, int, float]] = []
    for _ in range(n - 1):
        candidates = np.where(~in_tree)[0]
        nxt = candidates[np.argmin(best[candidates])]
        edges.append((int(best_from[nxt]), int(nxt), float(best[nxt])))
        in_tree[nxt] = True
        improved = weights[nxt] < best
        improved &= ~in_tree
        best[improved] = weights[nxt][improved]
        best_from[improved] = nxt
    return edges


def single_linkage(edges: list[tuple[int, int, float]], n: int) -> np.ndarray:
    """Dendrogram rows (left, right, distance, size) from MST edges.

    Merge node ids follow the scipy linkage convention: points are 0..n-1,
    the t-th merge creates node n+t.
    """
    order = sorted(range(len(edges)), key=lambda i: (edges[i][2], edges[i][0], edges[i][1]))
    parent = list(range(2 * n - 1))
    size = [1] * (2 * n - 1)
    current = list(range(n))  # current cluster node for each union-find root

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    rows = np.zeros((len(edges), 4))
    next_node = n
    for t, ei in enumerate(order):
        a, b, w = edges[ei]
        ra, rb = find(a), find(b)
        left, right = current[ra], current[rb]
        rows[t] = (left, right, w, size[ra] + size[rb])
        parent[ra] = rb
        size[rb] = size[ra] + size[rb]
        current[rb] = next_node
        next_node += 1
    return rows


@dataclass(frozen=True)
class CondensedRow:
    parent: int
    child: int   # < n: a point; >= n: a cluster
    lam: float   # lambda (1/distance) at which the child detaches or is born
    size: int


def _subtree_points(rows: np.ndarray, node: int, n: int) -> list[int]:
    points: list[int] = []
    stack = [node]
    while stack:
        x = stack.pop()
        if x < n:
            points.append(x)
        else:
            left, right = int(rows[x - n][0]), int(rows[x - n][1])
            stack.extend((left, right))
    return points


def condense_tree(rows: np.ndarray, n: int,
                  min_cluster_size: int) -> list[CondensedRow]:
    """Collapse the dendrogram into clusters of >= min_cluster_size.

    A split only creates new clusters when both sides are big enough;
    otherwise small-side points simply fall out of the surviving cluster
    at the split's lambda. Condensed cluster ids start at n (the root).
    """
    if n == 0:
        return []
    if n == 1:
        return []
    out: list[CondensedRow] = []
    root = 2 * n - 2
    next_label = n + 1
    # (dendrogram node, condensed label of the cluster it belongs to)
    stack: list[tuple[int, int]] = [(root, n)]
    while stack:
        node, label = stack.pop()
        if node < n:
            continue
        left, right, dist, _ = rows[node - n]
        left, right = int(left), int(right)
        lam = 1.0 / max(dist, _MIN_DISTANCE)
        left_size = 1 if left < n else int(rows[left - n][3])
        right_size = 1 if right < n else int(rows[right - n][3])
        if left_size >= min_cluster_size and right_size >= min_cluster_size:
            for child, child_size in ((left, left_size), (right, right_size)):
                out.append(CondensedRow(label, next_label, lam, child_size))
                stack.append((child, next_label))
                next_label += 1
        elif left_size >= min_cluster_size:
            for p in _subtree_points(rows, right, n):
                out.append(CondensedRow(label, p, lam, 1))
            stack.append((left, label))
        elif right_size >= min_cluster_size:
            for p in _subtree_points(rows, left, n):
                out.append(CondensedRow(label, p, lam, 1))
            stack.append((right, label))
        else:
            for p in _subtree_points(rows, node, n):
                out.append(CondensedRow(label, p, lam, 1))
    return out


def compute_stability(tree: list[CondensedRow]) -> dict[int, float]:
    root = min(r.parent for r in tree)
    births: dict[int, float] = {root: 0.0}
    for row in tree:
        if row.child > root:  # cluster birth
            births.setdefault(row.child, row.lam)
    stability: dict[int, float] = {}
    for row in tree:
        birth = births.get(row.parent, 0.0)
        stability[row.parent] = stability.get(row.parent, 0.0) + (
            (row.lam - birth) * row.size
        )
    return stability


def extract_eom(tree: list[CondensedRow], n: int) -> np.ndarray:
    """Flat labels via excess-of-mass selection; -1 marks noise.

    The root is a legitimate candidate (a corpus of near-duplicates should
    come back as one cluster, not all noise), but loses to any child
    combination with higher total stability.
    """
    if not tree:
        return np.full(n, -1, dtype=int)
    stability = compute_stability(tree)
    children: dict[int, list[int]] = {}
    for row in tree:
        if row.child >= n:  # cluster child
            children.setdefault(row.parent, []).append(row.child)
    clusters = sorted(stability.keys(), reverse=True)  # leaves first
    selected: dict[int, bool] = {c: True for c in clusters}
    running = dict(stability)
    for c in clusters:
        child_total = sum(running.get(ch, 0.0) for ch in children.get(c, []))
        if children.get(c) and child_total > running[c]:
            selected[c] = False
            running[c] = child_total
        else:
            # c wins: deselect every descendant cluster
            stack = list(children.get(c, []))
            while stack:
                d = stack.pop()
                selected[d] = False
                stack.extend(children.get(d, []))
    chosen = [c for c in clusters if selected[c]]
    label_of = {c: i for i, c in enumerate(sorted(chosen))}
    parent_of_cluster = {row.child: row.parent for row in tree if row.child >= n}
    point_parent = {row.child: row.parent for row in tree if row.child < n}
    labels = np.full(n, -1, dtype=int)
    for p in range(n):
        c = point_parent.get(p)
        while c is not None:
            if c in label_of:
                labels[p] = label_of[c]
                break
            c = parent_of_cluster.get(c)
    return labels


def hdbscan_labels(vectors: np.ndarray, min_cluster_size: int = 2,
                   min_samples: int = 1) -> np.ndarray:
    """Cluster unit vectors under 1 - cosine; returns labels, -1 = noise."""
    if min_cluster_size < 2:
        raise ValueError("min_cluster_size must be >= 2")
    n = vectors.shape[0]
    if n == 0:
        return np.empty(0, dtype=int)
    if n < min_cluster_size:
        return np.full(n, -1, dtype=int)
    dist = cosine_distance_matrix(vectors)
    core = core_distances(dist, min_samples)
    mreach = mutual_reachability(dist, core)
    edges = prim_mst(mreach)
    rows = single_linkage(edges, n)
    tree = condense_tree(rows, n, min_cluster_size)
    return extract_eom(tree, n)


def mst_total_weight(vectors: np.ndarray, min_samples: int = 1) -> float:
    """Total mutual-reachability MST weight (exposed for oracle checks)."""
    dist = cosine_distance_matrix(vectors)
    core = core_distances(dist, min_samples)
    mreach = mutual_reachability(dist, core)
    return float(sum(w for _, _, w in prim_mst(mreach)))
