"""Concept-map rubric totals and cluster performance comparison."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .clustering import Partition
from .errors import ValidationError
from .stats import TestResult, one_way_anova

PROPOSITION_POINTS = 1
HIERARCHY_POINTS = 5
EXAMPLE_POINTS = 1


@dataclass(frozen=True)
class ConceptMapTally:
    propositions: int
    hierarchies: int
    examples: int

    def __post_init__(self):
        for name in ("propositions", "hierarchies", "examples"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValidationError(f"{name} must be a nonnegative integer, got {v!r}")

    @property
    def total(self) -> int:
        return (
            PROPOSITION_POINTS * self.propositions
            + HIERARCHY_POINTS * self.hierarchies
            + EXAMPLE_POINTS * self.examples
        )


def score_concept_map(propositions: int, hierarchies: int, examples: int) -> ConceptMapTally:
    return ConceptMapTally(propositions, hierarchies, examples)


@dataclass
class PerformanceReport:
    clusters: list[int]
    means: dict[int, float]
    sds: dict[int, float]
    ns: dict[int, int]
    anova: TestResult | None
    excluded: list[int]

    @property
    def significant(self) -> bool:
        return self.anova is not None and self.anova.p_value < 0.05

    def note(self) -> str:
        if self.anova is None:
            return "fewer than two clusters with 2+ members; no ANOVA"
        if not self.significant:
            return f"no statistical difference identified (F = {self.anova.statistic:.2f}, p = {self.anova.p_value:.3f})"
        return f"clusters differ (F = {self.anova.statistic:.2f}, p = {self.anova.p_value:.3g})"


def cluster_performance(scores: Mapping[str, float], partition: Partition | Mapping[str, int]) -> PerformanceReport:
    cluster_of = partition.as_dict() if isinstance(partition, Partition) else dict(partition)
    missing = [s for s in cluster_of if s not in scores]
    if missing:
        raise ValidationError(f"no score for {missing[0]!r}")
    unassigned = [s for s in scores if s not in cluster_of]
    if unassigned:
        raise ValidationError(f"scored session {unassigned[0]!r} has no cluster")
    clusters = sorted(set(cluster_of.values()))
    groups = {c: np.array([scores[s] for s, k in cluster_of.items() if k == c], dtype=float) for c in clusters}
    means = {c: float(g.mean()) for c, g in groups.items()}
    sds = {c: float(g.std(ddof=1)) if len(g) > 1 else float("nan") for c, g in groups.items()}
    ns = {c: len(g) for c, g in groups.items()}
    excluded = [c for c in clusters if ns[c] < 2]
    if excluded:
        warnings.warn(f"clusters {excluded} have fewer than 2 members and are left out of the ANOVA")
    usable = [groups[c] for c in clusters if ns[c] >= 2]
    anova = one_way_anova(usable) if len(usable) >= 2 else None
    return PerformanceReport(clusters, means, sds, ns, anova, excluded)
