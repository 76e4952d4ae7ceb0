"""Krippendorff's alpha for nominal ratings."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Mapping, Sequence

import numpy as np

from .errors import ValidationError


@dataclass
class AlphaResult:
    alpha: float
    observed_disagreement: float
    expected_disagreement: float
    labels: list
    coincidence: np.ndarray
    n_pairable: int
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "observed_disagreement": self.observed_disagreement,
            "expected_disagreement": self.expected_disagreement,
            "n_pairable": self.n_pairable,
            "degenerate": self.degenerate,
            "labels": [str(x) for x in self.labels],
            "coincidence": self.coincidence.tolist(),
        }


@dataclass
class RaterTable:
    """Nominal ratings: ``ratings[rater][unit]`` is a label or ``None``."""

    units: list
    ratings: list[list]
    raters: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.ratings) < 2:
            raise ValidationError("need at least 2 raters")
        for row in self.ratings:
            if len(row) != len(self.units):
                raise ValidationError("every rater row must cover every unit")
        if not self.raters:
            self.raters = list(range(len(self.ratings)))

    @classmethod
    def from_mapping(cls, by_rater: Mapping[Hashable, Mapping[Hashable, Hashable]]) -> "RaterTable":
        units = sorted({u for r in by_rater.values() for u in r}, key=str)
        raters = list(by_rater)
        ratings = [[by_rater[r].get(u) for u in units] for r in raters]
        return cls(units, ratings, raters)


def coincidence_matrix(table: RaterTable):
    labels = sorted({v for row in table.ratings for v in row if v is not None}, key=str)
    index = {v: i for i, v in enumerate(labels)}
    o = np.zeros((len(labels), len(labels)))
    n_pairable = 0
    for u in range(len(table.units)):
        vals = [index[row[u]] for row in table.ratings if row[u] is not None]
        m = len(vals)
        if m < 2:
            continue
        n_pairable += m
        counts = np.bincount(vals, minlength=len(labels)).astype(float)
        # ordered pairs of distinct raters within the unit, weighted 1/(m-1)
        o += (np.outer(counts, counts) - np.diag(counts)) / (m - 1)
    return labels, o, n_pairable


def krippendorff_alpha(table: RaterTable) -> AlphaResult:
    """Nominal alpha = 1 - Do/De from the coincidence matrix.

    Units with fewer than two ratings do not enter the matrix.  When every
    pairable value is identical (Do = De = 0) alpha is reported as 1.0 with
    ``degenerate=True``.
    """
    labels, o, n = coincidence_matrix(table)
    if n == 0:
        raise ValidationError("insufficient overlap: no unit rated by 2 or more raters")
    marg = o.sum(axis=1)
    do = (n - np.trace(o)) / n
    de = (n * n - np.sum(marg**2)) / (n * (n - 1))
    if de == 0:
        if do == 0:
            return AlphaResult(1.0, 0.0, 0.0, labels, o, n, degenerate=True)
        raise ValidationError("expected disagreement is zero but observed is not")
    return AlphaResult(float(1 - do / de), float(do), float(de), labels, o, n)


def channelwise_alpha(tables: Mapping[str, RaterTable]) -> dict:
    """Alpha per channel and pooled over all channels.

    Each table holds one channel's ratings; the pooled table treats each
    (channel, unit) pair as a separate unit.
    """
    out = {name: krippendorff_alpha(t) for name, t in tables.items()}
    tabs = list(tables.values())
    n_raters = max(len(t.ratings) for t in tabs)
    units, ratings = [], [[] for _ in range(n_raters)]
    for name, t in tables.items():
        units.extend((name, u) for u in t.units)
        for r in range(n_raters):
            row = t.ratings[r] if r < len(t.ratings) else [None] * len(t.units)
            ratings[r].extend(row)
    out["pooled"] = krippendorff_alpha(RaterTable(units, ratings))
    return out


def table_from_rows(rows: Sequence[Sequence], missing=("", None)) -> RaterTable:
    """Build a table from ``(unit, rating_rater1, rating_rater2, ...)`` rows."""
    units = [r[0] for r in rows]
    n_raters = len(rows[0]) - 1 if rows else 0
    ratings = [[(None if r[k + 1] in missing else r[k + 1]) for r in rows] for k in range(n_raters)]
    return RaterTable(units, ratings)
