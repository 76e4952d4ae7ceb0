"""Code frequencies per cluster and the one-way test battery."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np
from scipy import special
from scipy.stats import rankdata

from .clustering import Partition
from .coding import MISSING, CodingScheme, MultichannelSequence
from .errors import ValidationError


def tail_probability(statistic: float, distribution: str, *params: float) -> float:
    """Upper-tail probability of an F(d1, d2) or chi-square(d) statistic."""
    if any(not np.isfinite(p) or p <= 0 for p in params):
        raise ValidationError(f"degrees of freedom must be positive, got {params}")
    if np.isnan(statistic):
        return float("nan")
    if statistic <= 0:
        return 1.0
    if distribution == "f":
        d1, d2 = params
        if np.isinf(statistic):
            return 0.0
        # P(F > x) = I_{d2/(d2+d1 x)}(d2/2, d1/2)
        return float(special.betainc(d2 / 2, d1 / 2, d2 / (d2 + d1 * statistic)))
    if distribution == "chi2":
        (d,) = params
        if np.isinf(statistic):
            return 0.0
        return float(special.gammaincc(d / 2, statistic / 2))
    raise ValueError(f"unknown distribution {distribution!r}")


@dataclass
class PairwiseResult:
    group_a: int
    group_b: int
    statistic: float
    df: float
    p_raw: float
    p_value: float
    mean_a: float
    mean_b: float

    @property
    def direction(self) -> str:
        return ">" if self.mean_a > self.mean_b else "<" if self.mean_a < self.mean_b else "="


@dataclass
class TestResult:
    statistic: float
    df: tuple
    p_value: float
    method: str
    correction: str = "none"
    degenerate: bool = False
    posthoc: list[PairwiseResult] = field(default_factory=list)

    def significant_pairs(self, alpha: float = 0.05, names: Sequence[str] | None = None) -> list[str]:
        """Bonferroni-significant pairs as ``"A > B"`` strings, larger mean first."""
        out = []
        for r in self.posthoc:
            if r.p_value < alpha and r.direction != "=":
                hi, lo = (r.group_a, r.group_b) if r.direction == ">" else (r.group_b, r.group_a)
                label = (lambda g: names[g]) if names else (lambda g: f"group {g + 1}")
                out.append(f"{label(hi)} > {label(lo)}")
        return out


def _check_groups(groups, min_size=2):
    groups = [np.asarray(g, dtype=float) for g in groups]
    if len(groups) < 2:
        raise ValidationError("need at least 2 groups")
    if any(len(g) < min_size for g in groups):
        raise ValidationError(f"every group needs at least {min_size} observations")
    return groups


def _f_from_summary(means, sds, ns):
    means, sds, ns = (np.asarray(x, dtype=float) for x in (means, sds, ns))
    k, N = len(ns), ns.sum()
    grand = (ns * means).sum() / N
    ssb = (ns * (means - grand) ** 2).sum()
    ssw = ((ns - 1) * sds**2).sum()
    df1, df2 = k - 1, N - k
    msb, msw = ssb / df1, ssw / df2
    # equal means can leave rounding residue of order eps^2 * scale in ssb
    scale = max(float((ns * means**2).sum()), 1.0)
    if ssb <= 1e-24 * scale:
        return 0.0, (df1, df2), 1.0, msw == 0
    if msw == 0:
        return float("inf"), (df1, df2), 0.0, True
    F = msb / msw
    return float(F), (df1, df2), tail_probability(F, "f", df1, df2), False


def anova_from_summary(means, sds, ns, posthoc: bool = False) -> TestResult:
    """One-way ANOVA from group means, sample SDs (n-1) and sizes."""
    if not (len(means) == len(sds) == len(ns)):
        raise ValidationError("means, sds and ns must have equal length")
    if len(ns) < 2:
        raise ValidationError("need at least 2 groups")
    if any(n < 2 for n in ns):
        raise ValidationError("every group needs n >= 2")
    F, df, p, degenerate = _f_from_summary(means, sds, ns)
    result = TestResult(F, df, p, "anova", "bonferroni" if posthoc else "none", degenerate)
    if posthoc:
        result.posthoc.extend(_posthoc(means, sds, ns))
    return result


def _t_from_pooled(diff, sp2, na, nb, df):
    if sp2 == 0:
        if diff == 0:
            return 0.0, df, 1.0
        return float(np.copysign(np.inf, diff)), df, 0.0
    t = diff / np.sqrt(sp2 * (1 / na + 1 / nb))
    # two-sided t tail via F(1, df) of t^2
    return float(t), df, tail_probability(t * t, "f", 1, df)


def pooled_t_test(a, b) -> tuple[float, float, float]:
    """Two-sample Student t with pooled variance; returns ``(t, df, p)`` two-sided."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    na, nb = len(a), len(b)
    df = na + nb - 2
    sp2 = ((na - 1) * a.var(ddof=1) + (nb - 1) * b.var(ddof=1)) / df
    return _t_from_pooled(a.mean() - b.mean(), sp2, na, nb, df)


def _posthoc(means, sds, ns) -> list[PairwiseResult]:
    # pairwise t on the ANOVA error mean square (all groups pooled, df N - k),
    # Bonferroni over the k(k-1)/2 pairs
    means, sds, ns = (np.asarray(x, dtype=float) for x in (means, sds, ns))
    df = int(ns.sum()) - len(ns)
    msw = ((ns - 1) * sds**2).sum() / df
    pairs = list(combinations(range(len(ns)), 2))
    out = []
    for i, j in pairs:
        t, tdf, praw = _t_from_pooled(means[i] - means[j], msw, ns[i], ns[j], df)
        out.append(PairwiseResult(i, j, t, tdf, praw, min(1.0, len(pairs) * praw), float(means[i]), float(means[j])))
    return out


def one_way_anova(groups: Sequence[Sequence[float]], posthoc: bool = True) -> TestResult:
    """F = MSB/MSW with Bonferroni-corrected pooled t post-hoc comparisons."""
    groups = _check_groups(groups)
    means = [g.mean() for g in groups]
    sds = [g.std(ddof=1) if len(g) > 1 else 0.0 for g in groups]
    ns = [len(g) for g in groups]
    F, df, p, degenerate = _f_from_summary(means, sds, ns)
    result = TestResult(F, df, p, "anova", "bonferroni" if posthoc else "none", degenerate)
    if posthoc:
        result.posthoc.extend(_posthoc(means, sds, ns))
    return result


def levene_test(groups: Sequence[Sequence[float]]) -> TestResult:
    """Levene's W: ANOVA F on absolute deviations from each group mean."""
    groups = _check_groups(groups)
    dev = [np.abs(g - g.mean()) for g in groups]
    res = one_way_anova(dev, posthoc=False)
    return TestResult(res.statistic, res.df, res.p_value, "levene", degenerate=res.degenerate)


def kruskal_wallis(groups: Sequence[Sequence[float]]) -> TestResult:
    """H on pooled midranks, divided by the tie correction; chi-square(k-1) tail."""
    groups = [np.asarray(g, dtype=float) for g in groups]
    if len(groups) < 2 or any(len(g) == 0 for g in groups):
        raise ValidationError("need at least 2 non-empty groups")
    pooled = np.concatenate(groups)
    N = len(pooled)
    ranks = rankdata(pooled)
    df = len(groups) - 1
    _, counts = np.unique(pooled, return_counts=True)
    tie = 1 - (counts**3 - counts).sum() / (N**3 - N) if N > 1 else 0.0
    if tie == 0:
        return TestResult(float("nan"), (df,), float("nan"), "kruskal_wallis", degenerate=True)
    h = 0.0
    start = 0
    for g in groups:
        r = ranks[start : start + len(g)]
        h += r.sum() ** 2 / len(g)
        start += len(g)
    H = (12 / (N * (N + 1)) * h - 3 * (N + 1)) / tie
    H = max(H, 0.0)
    return TestResult(float(H), (df,), tail_probability(H, "chi2", df), "kruskal_wallis")


def bonferroni(pvalues: Sequence[float]) -> list[float]:
    m = len(pvalues)
    return [min(1.0, m * p) for p in pvalues]


def p_band(p: float) -> str:
    """Report-layer banding: ``< .001``, ``< .05``, ``< .10`` or ``> .10``."""
    if np.isnan(p):
        return "n/a"
    if p < 0.001:
        return "< .001***"
    if p < 0.05:
        return "< .05 **"
    if p < 0.10:
        return "< .10 *"
    return "> .10"


@dataclass
class FrequencyTable:
    codes: list[str]
    labels: list[str]
    counts: np.ndarray  # (sequences, codes), integer
    cluster_of: dict[str, int]

    @property
    def clusters(self) -> list[int]:
        return sorted(set(self.cluster_of.values()))

    def groups(self, code: str) -> list[np.ndarray]:
        col = self.codes.index(code)
        lab = np.array([self.cluster_of[l] for l in self.labels])
        return [self.counts[lab == c, col] for c in self.clusters]

    def summary(self) -> dict[tuple[str, int], tuple[float, float, int]]:
        """``(code, cluster) -> (mean, sample SD, n)``."""
        out = {}
        for code in self.codes:
            for c, g in zip(self.clusters, self.groups(code)):
                sd = float(g.std(ddof=1)) if len(g) > 1 else float("nan")
                out[(code, c)] = (float(g.mean()) if len(g) else float("nan"), sd, len(g))
        return out


def code_frequencies(
    seqs: Sequence[MultichannelSequence], partition: Partition | Mapping[str, int], scheme: CodingScheme
) -> FrequencyTable:
    cluster_of = partition.as_dict() if isinstance(partition, Partition) else dict(partition)
    codes = list(scheme.codes)
    col = {c: i for i, c in enumerate(codes)}
    counts = np.zeros((len(seqs), len(codes)), dtype=np.int64)
    for r, seq in enumerate(seqs):
        if seq.session_id not in cluster_of:
            raise ValidationError(f"sequence {seq.session_id!r} has no cluster assignment")
        for ch in seq.states:
            for s in ch:
                if s is not MISSING:
                    counts[r, col[s]] += 1
    return FrequencyTable(codes, [s.session_id for s in seqs], counts, cluster_of)


@dataclass
class CodeComparison:
    code: str
    summaries: list[tuple[float, float, int]]
    anova: TestResult
    levene: TestResult | None
    kruskal: TestResult | None
    tested_clusters: list[int]

    def significant_pairs(self, alpha: float = 0.05) -> list[str]:
        names = [f"Type {c}" for c in self.tested_clusters]
        return self.anova.significant_pairs(alpha, names)


def compare_clusters(table: FrequencyTable) -> list[CodeComparison]:
    """ANOVA, Levene and Kruskal-Wallis for every code across clusters.

    Clusters with fewer than two members are left out of the parametric
    tests.
    """
    out = []
    summ = table.summary()
    for code in table.codes:
        groups = table.groups(code)
        tested = [c for c, g in zip(table.clusters, groups) if len(g) >= 2]
        usable = [g for g in groups if len(g) >= 2]
        if len(usable) >= 2:
            anova = one_way_anova(usable)
            levene = levene_test(usable)
        else:
            anova = TestResult(float("nan"), (), float("nan"), "anova", degenerate=True)
            levene = None
        kw = kruskal_wallis([g for g in groups if len(g)]) if sum(len(g) > 0 for g in groups) >= 2 else None
        out.append(CodeComparison(code, [summ[(code, c)] for c in table.clusters], anova, levene, kw, tested))
    return out
