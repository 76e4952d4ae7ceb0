"""Epistemic network analysis over multichannel sequences.

Each sequence becomes a vector of code-pair co-occurrence counts gathered
over a moving stanza window.  Vectors are scaled to unit length, centered,
and projected onto their top two singular directions.  Cluster networks are
the mean normalized vectors of their members.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .clustering import Partition
from .coding import MISSING, CodingScheme, MultichannelSequence
from .errors import ComputationError, ValidationError

DEFAULT_WINDOW = 4


def code_pairs(codes: Sequence[str]) -> list[tuple[str, str]]:
    return list(combinations(codes, 2))


def presence_matrix(seq: MultichannelSequence, codes: Sequence[str]) -> np.ndarray:
    col = {c: i for i, c in enumerate(codes)}
    P = np.zeros((len(seq), len(codes)), dtype=np.int64)
    for ch in seq.states:
        for t, s in enumerate(ch):
            if s is not MISSING:
                P[t, col[s]] = 1
    return P


def accumulate(seq: MultichannelSequence, window: int, codes: Sequence[str]) -> np.ndarray:
    """Binary co-occurrence counts per code pair, summed over stanzas.

    The stanza ending at position ``t`` spans the last ``window`` positions
    up to and including ``t``; a pair scores 1 for that stanza when both
    codes appear anywhere in it.
    """
    if window < 1:
        raise ValidationError("window must be >= 1")
    P = presence_matrix(seq, codes)
    if len(P) == 0:
        return np.zeros(len(codes) * (len(codes) - 1) // 2)
    csum = np.vstack([np.zeros((1, P.shape[1]), dtype=np.int64), np.cumsum(P, axis=0)])
    t = np.arange(1, len(P) + 1)
    lo = np.maximum(t - window, 0)
    in_stanza = ((csum[t] - csum[lo]) > 0).astype(float)
    co = in_stanza.T @ in_stanza
    iu = np.triu_indices(len(codes), k=1)
    return co[iu]


@dataclass
class EnaModel:
    codes: list[str]
    pairs: list[tuple[str, str]]
    labels: list[str]
    raw_vectors: np.ndarray
    normalized_vectors: np.ndarray
    zero_vector: np.ndarray
    center: np.ndarray
    directions: np.ndarray  # (2, n_pairs), orthonormal rows
    singular_values: np.ndarray
    variance_share: np.ndarray
    points: np.ndarray
    centroids: dict[int, np.ndarray] = field(default_factory=dict)
    edges: dict[int, np.ndarray] = field(default_factory=dict)
    window: int = DEFAULT_WINDOW

    def node_positions(self) -> np.ndarray:
        """Per-code 2-D position: mean loading of the pairs touching the code."""
        pos = np.zeros((len(self.codes), 2))
        index = {c: i for i, c in enumerate(self.codes)}
        for p, (a, b) in enumerate(self.pairs):
            pos[index[a]] += self.directions[:, p]
            pos[index[b]] += self.directions[:, p]
        return pos / max(len(self.codes) - 1, 1)


def normalize_and_project(
    raw_vectors: np.ndarray,
    labels: Sequence[str],
    partition: Partition | Mapping[str, int] | None,
    codes: Sequence[str],
    window: int = DEFAULT_WINDOW,
) -> EnaModel:
    raw = np.asarray(raw_vectors, dtype=float)
    if raw.ndim != 2 or raw.shape[0] < 2:
        raise ValidationError("need at least 2 sequences")
    norms = np.linalg.norm(raw, axis=1)
    zero = norms == 0
    if zero.all():
        raise ComputationError("no co-occurrence structure: every vector is zero")
    normalized = np.zeros_like(raw)
    normalized[~zero] = raw[~zero] / norms[~zero, None]

    fit = normalized[~zero]
    center = fit.mean(axis=0)
    centered = fit - center
    _, s, vt = np.linalg.svd(centered, full_matrices=True)
    directions = vt[:2].copy()
    for d in directions:
        if d[np.argmax(np.abs(d))] < 0:
            d *= -1
    sv = np.zeros(2)
    sv[: min(2, len(s))] = s[:2]
    total = float((centered**2).sum())
    share = sv**2 / total if total > 0 else np.zeros(2)

    points = np.zeros((raw.shape[0], 2))
    points[~zero] = centered @ directions.T

    model = EnaModel(
        codes=list(codes),
        pairs=code_pairs(codes),
        labels=list(labels),
        raw_vectors=raw,
        normalized_vectors=normalized,
        zero_vector=zero,
        center=center,
        directions=directions,
        singular_values=sv,
        variance_share=share,
        points=points,
        window=window,
    )
    if partition is not None:
        cluster_of = partition.as_dict() if isinstance(partition, Partition) else dict(partition)
        lab = np.array([cluster_of[l] for l in labels])
        for c in sorted(set(lab.tolist())):
            members = lab == c
            model.centroids[c] = points[members].mean(axis=0)
            model.edges[c] = normalized[members].mean(axis=0)
    return model


def fit_ena(
    seqs: Sequence[MultichannelSequence],
    scheme: CodingScheme,
    partition: Partition | Mapping[str, int] | None = None,
    window: int = DEFAULT_WINDOW,
) -> EnaModel:
    codes = list(scheme.codes)
    raw = np.array([accumulate(s, window, codes) for s in seqs])
    return normalize_and_project(raw, [s.session_id for s in seqs], partition, codes, window)


def strong_edges(model: EnaModel, cluster: int, threshold: float) -> list[tuple[tuple[str, str], float]]:
    """Pairs whose cluster weight is strictly above ``threshold``, heaviest first."""
    if cluster not in model.edges:
        raise ValidationError(f"unknown cluster {cluster!r}")
    w = model.edges[cluster]
    keep = [(model.pairs[p], float(w[p])) for p in range(len(w)) if w[p] > threshold]
    return sorted(keep, key=lambda x: -x[1])
