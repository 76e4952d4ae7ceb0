"""Ward hierarchical clustering on a precomputed dissimilarity matrix."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .seqdist import DistanceMatrix

# Average silhouette below this is read as "no substantial structure"
# (Kaufman & Rousseeuw's rule of thumb).
NO_STRUCTURE_SILHOUETTE = 0.25


@dataclass
class Dendrogram:
    """Merge list in linkage-matrix form.

    ``merges[m] = (left, right, height, size)``; node ids below ``n`` are
    leaves, node ``n + m`` is the cluster created by merge ``m``.
    """

    labels: list[str]
    merges: list[tuple[int, int, float, int]]
    linkage: str = "ward2"

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def heights(self) -> np.ndarray:
        return np.array([m[2] for m in self.merges])

    def as_array(self) -> np.ndarray:
        return np.array(self.merges, dtype=float).reshape(-1, 4)

    def leaf_order(self) -> list[int]:
        """Leaves left to right as drawn."""
        if self.n == 1:
            return [0]
        children = {self.n + m: (l, r) for m, (l, r, _, _) in enumerate(self.merges)}
        out, stack = [], [self.n + len(self.merges) - 1]
        while stack:
            node = stack.pop()
            if node < self.n:
                out.append(node)
            else:
                l, r = children[node]
                stack.extend((r, l))
        return out


@dataclass
class Partition:
    labels: list[str]
    assignment: list[int]

    @property
    def k(self) -> int:
        return len(set(self.assignment))

    def as_dict(self) -> dict[str, int]:
        return dict(zip(self.labels, self.assignment))

    def members(self, cluster: int) -> list[str]:
        return [l for l, a in zip(self.labels, self.assignment) if a == cluster]

    @property
    def clusters(self) -> list[int]:
        return sorted(set(self.assignment))


def _validate(D: DistanceMatrix):
    v = D.values
    if v.shape[0] < 1:
        raise ValidationError("empty distance matrix")
    if not np.allclose(v, v.T, rtol=0, atol=0):
        raise ValidationError("distance matrix is not symmetric")
    if np.any(np.diag(v) != 0) or np.any(v < 0):
        raise ValidationError("distance matrix must have zero diagonal and nonnegative entries")


def ward_cluster(D: DistanceMatrix, linkage: str = "ward2") -> Dendrogram:
    """Agglomerate with Ward's criterion via the Lance-Williams recurrence.

    ``ward2`` updates squared dissimilarities and reports rooted heights;
    ``ward1`` applies the same recurrence to the raw dissimilarities.  Ties
    go to the smallest ``(i, j)`` slot pair, where a merged cluster keeps
    the smaller slot of its two parts.
    """
    if linkage not in ("ward2", "ward1"):
        raise ValueError(f"unknown linkage {linkage!r}")
    _validate(D)
    n = D.n
    d = D.values.astype(float).copy()
    if linkage == "ward2":
        d = d**2
    size = np.ones(n)
    node = list(range(n))
    active = np.ones(n, dtype=bool)
    merges = []
    for step in range(n - 1):
        idx = np.flatnonzero(active)
        sub = d[np.ix_(idx, idx)]
        iu = np.triu_indices(len(idx), k=1)
        vals = sub[iu]
        best = np.flatnonzero(vals == vals.min())[0]  # row-major: smallest (i, j)
        i, j = idx[iu[0][best]], idx[iu[1][best]]
        dij = d[i, j]
        ni, nj = size[i], size[j]
        others = idx[(idx != i) & (idx != j)]
        nk = size[others]
        d[i, others] = d[others, i] = (
            (ni + nk) * d[i, others] + (nj + nk) * d[j, others] - nk * dij
        ) / (ni + nj + nk)
        height = float(np.sqrt(max(dij, 0.0))) if linkage == "ward2" else float(dij)
        left, right = sorted((node[i], node[j]))
        merges.append((left, right, height, int(ni + nj)))
        size[i] = ni + nj
        node[i] = n + step
        active[j] = False
    return Dendrogram(list(D.labels), merges, linkage)


def cut_tree(dend: Dendrogram, k: int) -> Partition:
    """Undo the ``k - 1`` highest merges; ids follow first leaf appearance."""
    n = dend.n
    if not 1 <= k <= n:
        raise ValidationError(f"k must be in 1..{n}, got {k}")
    parent = list(range(2 * n - 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for m, (l, r, _, _) in enumerate(dend.merges[: n - k]):
        parent[find(l)] = n + m
        parent[find(r)] = n + m
    ids: dict[int, int] = {}
    assignment = []
    for leaf in range(n):
        root = find(leaf)
        if root not in ids:
            ids[root] = len(ids) + 1
        assignment.append(ids[root])
    return Partition(list(dend.labels), assignment)


def silhouette_samples(D: np.ndarray, assignment: Sequence[int]) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    lab = np.asarray(assignment)
    out = np.zeros(len(lab))
    clusters = np.unique(lab)
    for i in range(len(lab)):
        own = lab == lab[i]
        if own.sum() == 1:
            continue  # singleton silhouette is 0
        a = D[i, own].sum() / (own.sum() - 1)
        b = min(D[i, lab == c].mean() for c in clusters if c != lab[i])
        m = max(a, b)
        out[i] = (b - a) / m if m > 0 else 0.0
    return out


def within_sum_of_squares(D: np.ndarray, assignment: Sequence[int]) -> float:
    """Sum over clusters of ``sum_{i<j in c} d_ij^2 / n_c``."""
    D = np.asarray(D, dtype=float)
    lab = np.asarray(assignment)
    total = 0.0
    for c in np.unique(lab):
        idx = np.flatnonzero(lab == c)
        total += (D[np.ix_(idx, idx)] ** 2).sum() / (2 * len(idx))
    return float(total)


@dataclass
class FitRow:
    k: int
    avg_silhouette: float
    wss: float
    height_gap: float


@dataclass
class GoodnessOfFit:
    rows: list[FitRow]
    suggested_k: int
    no_structure: bool


def goodness_of_fit(D: DistanceMatrix, dend: Dendrogram, k_range: Sequence[int]) -> GoodnessOfFit:
    """Average silhouette, within-cluster SS and height gap for each ``k``.

    ``height_gap`` is the jump from the last merge kept to the first merge
    undone by the cut.  The suggestion maximizes average silhouette, ties to
    the smaller ``k``.
    """
    n = D.n
    ks = sorted(set(int(k) for k in k_range))
    if not ks or ks[0] < 2 or ks[-1] > n - 1:
        raise ValidationError(f"k_range must lie within 2..{n - 1}")
    h = dend.heights
    rows = []
    for k in ks:
        part = cut_tree(dend, k)
        sil = float(silhouette_samples(D.values, part.assignment).mean())
        gap = float(h[n - k] - h[n - k - 1])
        rows.append(FitRow(k, sil, within_sum_of_squares(D.values, part.assignment), gap))
    best = max(rows, key=lambda r: (round(r.avg_silhouette, 12), -r.k))
    return GoodnessOfFit(rows, best.k, best.avg_silhouette < NO_STRUCTURE_SILHOUETTE)


def adjusted_rand_index(a: Sequence, b: Sequence) -> float:
    """Hubert-Arabie adjusted Rand index between two labelings."""
    if len(a) != len(b):
        raise ValueError("labelings differ in length")
    _, ai = np.unique(np.asarray(a, dtype=object).astype(str), return_inverse=True)
    _, bi = np.unique(np.asarray(b, dtype=object).astype(str), return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    sum_ij = sum(comb(int(x), 2) for x in table.ravel())
    sum_a = sum(comb(int(x), 2) for x in table.sum(axis=1))
    sum_b = sum(comb(int(x), 2) for x in table.sum(axis=0))
    total = comb(len(a), 2)
    expected = sum_a * sum_b / total if total else 0.0
    max_index = (sum_a + sum_b) / 2
    if max_index == expected:
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))
