"""Optimal-matching distance between multichannel sequences.

Positions are compared as whole tuples across channels: a substitution
costs the sum of per-channel substitution costs over channels where both
sides are observed and differ, an indel costs the per-channel indel costs
of the observed entries (or of every channel in ``flat`` mode).  All
channels therefore share one alignment.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .coding import MISSING, CodingScheme, MultichannelSequence
from .errors import ValidationError


def substitution_cost(a: Sequence, b: Sequence, scheme: CodingScheme) -> float:
    cost = 0.0
    for c, (x, y) in enumerate(zip(a, b)):
        if x is MISSING or y is MISSING or x == y:
            continue
        cost += scheme.substitution_cost[c]
    return cost


def indel_cost(a: Sequence, scheme: CodingScheme) -> float:
    if scheme.indel_mode == "flat":
        return float(sum(scheme.indel_cost))
    return float(sum(scheme.indel_cost[c] for c, x in enumerate(a) if x is not MISSING))


def _encoded(seq, scheme):
    if isinstance(seq, np.ndarray):
        return seq
    return seq.encode(scheme)


def _indel_vector(codes: np.ndarray, scheme: CodingScheme) -> np.ndarray:
    w = np.asarray(scheme.indel_cost)[:, None]
    if scheme.indel_mode == "flat":
        return np.full(codes.shape[1], w.sum())
    return ((codes >= 0) * w).sum(axis=0)


def _substitution_matrix(a: np.ndarray, b: np.ndarray, scheme: CodingScheme) -> np.ndarray:
    w = np.asarray(scheme.substitution_cost)
    out = np.zeros((a.shape[1], b.shape[1]))
    for c in range(a.shape[0]):
        x = a[c][:, None]
        y = b[c][None, :]
        out += ((x != y) & (x >= 0) & (y >= 0)) * w[c]
    return out


def om_distance(A, B, scheme: CodingScheme) -> float:
    """Minimum edit cost turning ``A`` into ``B``.

    Accepts :class:`MultichannelSequence` objects or their encoded
    ``(channels, T)`` integer arrays.  The DP runs row by row; the
    insertion chain inside a row is resolved with a running minimum over
    cumulative insertion costs, which is exact for nonnegative costs.
    """
    a = _encoded(A, scheme)
    b = _encoded(B, scheme)
    del_a = _indel_vector(a, scheme)
    ins_b = _indel_vector(b, scheme)
    if a.shape[1] == 0:
        return float(ins_b.sum())
    if b.shape[1] == 0:
        return float(del_a.sum())
    sub = _substitution_matrix(a, b, scheme)
    cum_ins = np.concatenate(([0.0], np.cumsum(ins_b)))
    prev = cum_ins.copy()
    for i in range(a.shape[1]):
        cur = np.empty_like(prev)
        cur[0] = prev[0] + del_a[i]
        cur[1:] = np.minimum(prev[:-1] + sub[i], prev[1:] + del_a[i])
        # cur[j] = min_k<=j cur[k] + (cum_ins[j] - cum_ins[k])
        cur = np.minimum.accumulate(cur - cum_ins) + cum_ins
        prev = cur
    return float(prev[-1])


@dataclass
class DistanceMatrix:
    labels: list[str]
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        n = len(self.labels)
        if self.values.shape != (n, n):
            raise ValidationError(f"distance matrix shape {self.values.shape} does not match {n} labels")

    @property
    def n(self) -> int:
        return len(self.labels)

    def check(self) -> None:
        v = self.values
        if not np.array_equal(v, v.T):
            raise ValidationError("distance matrix is not symmetric")
        if np.any(np.diag(v) != 0):
            raise ValidationError("distance matrix has a nonzero diagonal")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValidationError("distance matrix has negative or non-finite entries")

    def subset(self, labels: Sequence[str]) -> "DistanceMatrix":
        idx = [self.labels.index(x) for x in labels]
        return DistanceMatrix(list(labels), self.values[np.ix_(idx, idx)])


def _pair_chunk(args):
    encoded, pairs, scheme = args
    return [om_distance(encoded[i], encoded[j], scheme) for i, j in pairs]


def distance_matrix(
    seqs: Sequence[MultichannelSequence],
    scheme: CodingScheme,
    workers: int = 1,
    normalize: str | None = None,
) -> DistanceMatrix:
    """Pairwise OM distances over the upper triangle, mirrored.

    ``normalize="maxlen"`` divides each entry by
    ``max(|A|, |B|) * sum(indel costs)``.
    """
    if len(seqs) < 2:
        raise ValidationError("distance_matrix needs at least 2 sequences")
    if normalize not in (None, "none", "maxlen"):
        raise ValueError(f"unknown normalization {normalize!r}")
    encoded = [s.encode(scheme) for s in seqs]
    n = len(seqs)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if workers > 1 and len(pairs) > 1:
        chunks = [pairs[k::workers] for k in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_pair_chunk, [(encoded, c, scheme) for c in chunks]))
        flat = {}
        for chunk, res in zip(chunks, results):
            flat.update(zip(chunk, res))
        dists = [flat[p] for p in pairs]
    else:
        dists = _pair_chunk((encoded, pairs, scheme))
    values = np.zeros((n, n))
    for (i, j), d in zip(pairs, dists):
        if normalize == "maxlen":
            denom = max(len(seqs[i]), len(seqs[j])) * sum(scheme.indel_cost)
            d = d / denom if denom > 0 else 0.0
        values[i, j] = values[j, i] = d
    return DistanceMatrix([s.session_id for s in seqs], values)
