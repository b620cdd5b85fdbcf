"""Ward agglomeration of a dissimilarity matrix, tree cutting, and
cluster-count diagnostics.

The agglomeration follows the squared-dissimilarity convention: the
Lance-Williams update runs on d^2 and merge heights are reported as
sqrt(d^2) at merge time. The alternative convention (update on raw d)
yields different trees; callers comparing against other tools should
check which one those use.

Merges are found with the nearest-neighbor-chain algorithm (O(n^2) time)
and then ordered by height, which reproduces the textbook greedy
agglomeration whenever merge dissimilarities are distinct. Every scan
breaks ties toward the smallest original index, so results are fully
deterministic; under exact ties the merge order may differ from the
greedy one while remaining a valid Ward tree.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .dissimilarity import DissimilarityMatrix
from .errors import ValidationError


@dataclass(frozen=True)
class Dendrogram:
    """Merge tree over n leaves.

    ``merges`` has one row per merge: (left node, right node, height,
    member count). Leaves are nodes 0..n-1; merge t creates node n+t.
    ``leaf_order`` is the left-to-right leaf permutation of the tree.
    """

    n: int
    merges: np.ndarray  # (n-1, 4) float64; node ids are integral
    leaf_order: np.ndarray  # (n,) int64

    def __post_init__(self) -> None:
        merges = np.asarray(self.merges, dtype=np.float64)
        if merges.shape != (self.n - 1, 4):
            raise ValidationError(f"expected {self.n - 1} merges, got {merges.shape}")
        merges.setflags(write=False)
        object.__setattr__(self, "merges", merges)
        order = np.asarray(self.leaf_order, dtype=np.int64)
        if sorted(order.tolist()) != list(range(self.n)):
            raise ValidationError("leaf_order must be a permutation of 0..n-1")
        order.setflags(write=False)
        object.__setattr__(self, "leaf_order", order)

    @property
    def heights(self) -> np.ndarray:
        return self.merges[:, 2]

    def to_json(self) -> str:
        doc = {
            "n": self.n,
            "merges": [
                {
                    "left": int(left),
                    "right": int(right),
                    "height": height,
                    "count": int(count),
                }
                for left, right, height, count in self.merges
            ],
            "leaf_order": self.leaf_order.tolist(),
        }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Dendrogram":
        doc = json.loads(text)
        merges = np.array(
            [[m["left"], m["right"], m["height"], m["count"]] for m in doc["merges"]],
            dtype=np.float64,
        ).reshape(len(doc["merges"]), 4)
        return cls(n=doc["n"], merges=merges, leaf_order=np.array(doc["leaf_order"]))


@dataclass(frozen=True)
class ClusterAssignment:
    """Cut labels, 1..k, relabeled so cluster 1 is the largest."""

    k: int
    labels: np.ndarray  # (n,) int64 in 1..k
    sizes: np.ndarray  # (k,) int64

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels, dtype=np.int64)
        sizes = np.asarray(self.sizes, dtype=np.int64)
        if labels.min() < 1 or labels.max() > self.k:
            raise ValidationError("labels must lie in 1..k")
        if sizes.shape != (self.k,) or sizes.sum() != labels.shape[0]:
            raise ValidationError("sizes must sum to the number of subjects")
        labels.setflags(write=False)
        sizes.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "sizes", sizes)

    @property
    def n(self) -> int:
        return int(self.labels.shape[0])


class _UnionFind:
    def __init__(self, n: int) -> None:
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> int:
        rx, ry = self.find(x), self.find(y)
        self.parent[ry] = rx
        return rx


def ward_cluster(matrix: DissimilarityMatrix) -> Dendrogram:
    """Agglomerate a dissimilarity matrix into a Ward merge tree."""
    n = matrix.n
    if n < 2:
        raise ValidationError("clustering needs at least 2 items")
    square = matrix.toarray()
    d2 = square * square
    sizes = np.ones(n, dtype=np.int64)
    rep_a, rep_b, h2 = _kernels.ward_chain(d2, sizes)
    heights = np.sqrt(np.maximum(h2, 0.0))

    order = np.argsort(heights, kind="stable")
    uf = _UnionFind(n)
    node_of = list(range(n))
    count_of = [1] * n
    merges = np.empty((n - 1, 4), dtype=np.float64)
    for step, t in enumerate(order):
        ra, rb = uf.find(int(rep_a[t])), uf.find(int(rep_b[t]))
        na, nb = node_of[ra], node_of[rb]
        left, right = (na, nb) if na < nb else (nb, na)
        count = count_of[ra] + count_of[rb]
        root = uf.union(ra, rb)
        node_of[root] = n + step
        count_of[root] = count
        merges[step] = (left, right, heights[t], count)

    _check_tree_monotonicity(n, merges)
    return Dendrogram(n=n, merges=merges, leaf_order=_leaf_order(n, merges))


def _check_tree_monotonicity(n: int, merges: np.ndarray) -> None:
    height_of = np.zeros(2 * n - 1)
    height_of[n:] = merges[:, 2]
    bad = 0
    for t in range(n - 1):
        left, right = int(merges[t, 0]), int(merges[t, 1])
        if merges[t, 2] < height_of[left] - 1e-12 or merges[t, 2] < height_of[right] - 1e-12:
            bad += 1
    if bad:
        warnings.warn(
            f"{bad} merge(s) are lower than a child merge (height inversion); "
            "the input may not be metric",
            stacklevel=3,
        )


def _leaf_order(n: int, merges: np.ndarray) -> np.ndarray:
    children = {n + t: (int(merges[t, 0]), int(merges[t, 1])) for t in range(n - 1)}
    order = []
    stack = [2 * n - 2]
    while stack:
        node = stack.pop()
        if node < n:
            order.append(node)
        else:
            left, right = children[node]
            stack.append(right)
            stack.append(left)
    return np.array(order, dtype=np.int64)


def cut_tree(tree: Dendrogram, k: int) -> ClusterAssignment:
    """Undo the last k-1 merges and relabel parts by descending size,
    ties broken by smallest member index."""
    n = tree.n
    if k < 1 or k > n:
        raise ValidationError(f"k must be in 1..{n}, got {k}")
    uf = _UnionFind(n)
    for t in range(n - k):
        # merge rows store node ids; map back to any leaf inside each side
        left, right = int(tree.merges[t, 0]), int(tree.merges[t, 1])
        uf.union(_a_leaf(tree, left), _a_leaf(tree, right))
    roots = [uf.find(i) for i in range(n)]
    groups: dict[int, list[int]] = {}
    for i, r in enumerate(roots):
        groups.setdefault(r, []).append(i)
    ordered = sorted(groups.values(), key=lambda members: (-len(members), members[0]))
    labels = np.empty(n, dtype=np.int64)
    sizes = np.empty(len(ordered), dtype=np.int64)
    for label, members in enumerate(ordered, start=1):
        labels[members] = label
        sizes[label - 1] = len(members)
    return ClusterAssignment(k=k, labels=labels, sizes=sizes)


def _a_leaf(tree: Dendrogram, node: int) -> int:
    while node >= tree.n:
        node = int(tree.merges[node - tree.n, 0])
    return node


def silhouette(matrix: DissimilarityMatrix, assignment: ClusterAssignment) -> float:
    """Mean silhouette width over all points, straight from the matrix.

    Points in singleton clusters score 0 by convention; a clustering
    made only of singletons has no defined silhouette and is an error.
    """
    if assignment.k < 2:
        raise ValidationError("silhouette needs at least 2 clusters")
    if assignment.n != matrix.n:
        raise ValidationError("assignment and matrix sizes differ")
    if int(assignment.sizes.min()) < 1:
        raise ValidationError("every cluster must be non-empty")
    if int(assignment.sizes.max()) < 2:
        raise ValidationError("silhouette is undefined when every cluster is a singleton")
    square = matrix.toarray()
    labels = assignment.labels
    k = assignment.k
    n = matrix.n
    # dist_to_cluster[i, c]: total distance from i to members of cluster c+1
    dist_to_cluster = np.zeros((n, k))
    for c in range(k):
        dist_to_cluster[:, c] = square[:, labels == c + 1].sum(axis=1)
    sizes = assignment.sizes
    scores = np.zeros(n)
    for i in range(n):
        own = labels[i] - 1
        if sizes[own] == 1:
            continue  # singleton, score 0
        a_i = dist_to_cluster[i, own] / (sizes[own] - 1)
        b_i = np.inf
        for c in range(k):
            if c != own:
                b_i = min(b_i, dist_to_cluster[i, c] / sizes[c])
        scores[i] = (b_i - a_i) / max(a_i, b_i) if max(a_i, b_i) > 0 else 0.0
    return float(scores.mean())


def silhouette_profile(
    matrix: DissimilarityMatrix, tree: Dendrogram, ks: Sequence[int] = tuple(range(2, 9))
) -> dict[int, float]:
    """Mean silhouette for each candidate cluster count. Advisory: the
    caller picks k."""
    out: dict[int, float] = {}
    for k in ks:
        if 2 <= k <= matrix.n - 1:
            out[k] = silhouette(matrix, cut_tree(tree, k))
    return out


def write_assignment_csv(assignment: ClusterAssignment, subject_ids: Sequence[str], path) -> None:
    import csv

    if len(subject_ids) != assignment.n:
        raise ValidationError("subject id count does not match assignment size")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "cluster"])
        for sid, label in zip(subject_ids, assignment.labels):
            writer.writerow([sid, int(label)])


def read_assignment_csv(path) -> tuple[ClusterAssignment, list[str]]:
    import csv

    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["id", "cluster"]:
        raise ValidationError('assignment CSV must have header "id,cluster"')
    ids = [row[0] for row in rows[1:] if row]
    labels = np.array([int(row[1]) for row in rows[1:] if row], dtype=np.int64)
    k = int(labels.max())
    sizes = np.bincount(labels, minlength=k + 1)[1:]
    return ClusterAssignment(k=k, labels=labels, sizes=sizes), ids
