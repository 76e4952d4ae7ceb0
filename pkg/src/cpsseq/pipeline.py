"""End-to-end run: ingest, distances, clustering, then the per-cluster analyses."""

from __future__ import annotations

import hashlib
import json
import platform
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from . import io as cio
from .clustering import cut_tree, goodness_of_fit, ward_cluster
from .coding import CodingScheme, MultichannelSequence, build_sequences, load_scheme
from .ena import DEFAULT_WINDOW, fit_ena, strong_edges
from .errors import ComputationError, CpsError, SchemaError, ValidationError
from .hmm import select_states, viterbi
from .render import dendrogram_svg, ena_network_svg, hmm_graph_svg, sequence_index_svg
from .scoring import cluster_performance, score_concept_map
from .seqdist import distance_matrix
from .stats import code_frequencies, compare_clusters, p_band


class StageError(CpsError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause

    @property
    def exit_code(self) -> int:
        return 2 if isinstance(self.cause, (ComputationError, ArithmeticError)) else 1


@dataclass
class PipelineConfig:
    events: str
    out_dir: str = field(metadata={"manifest": False})
    scheme: str | None = None
    scores: str | None = None
    on_conflict: str = "error"
    drop_blank: bool = False
    indel_cost: float | None = None
    substitution_cost: float | None = None
    indel_mode: str = "observed"
    normalize: str | None = None
    linkage: str = "ward2"
    k: int | None = None
    k_range: tuple[int, int] = (2, 6)
    window: int = DEFAULT_WINDOW
    edge_threshold: float = 0.40
    states: tuple[int, int] = (2, 9)
    restarts: int = 100
    seed: int = 0
    tol: float = 1e-8
    max_iter: int = 1000
    # execution setting only; results do not depend on it
    workers: int = field(default=1, metadata={"manifest": False})

    def parameters(self) -> dict:
        d = asdict(self)
        for name, f in self.__dataclass_fields__.items():
            if f.metadata.get("manifest") is False:
                d.pop(name)
        for key in ("k_range", "states"):
            d[key] = list(d[key])
        return d


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _versions() -> dict:
    import numba
    import scipy

    return {
        "cpsseq": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "python": platform.python_version(),
    }


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n", encoding="utf-8")


def stats_rows(comparisons, clusters: Sequence[int], scheme: CodingScheme):
    header = ["channel", "code"]
    header += [f"Type {c} Mean (SD)" for c in clusters]
    header += ["F", "df1", "df2", "p", "p_band", "post_hoc", "levene_W", "levene_p", "kw_H", "kw_p"]
    rows = []
    for cmp in comparisons:
        cells = [f"{m:.2f} ({s:.2f})" if n > 1 else f"{m:.2f} (NA)" for m, s, n in cmp.summaries]
        a, lev, kw = cmp.anova, cmp.levene, cmp.kruskal
        df1, df2 = (a.df if len(a.df) == 2 else (float("nan"), float("nan")))
        rows.append(
            [scheme.channels[scheme.channel_of(cmp.code)].name, cmp.code, *cells,
             a.statistic, df1, df2, a.p_value, p_band(a.p_value), "; ".join(cmp.significant_pairs()),
             lev.statistic if lev else float("nan"), lev.p_value if lev else float("nan"),
             kw.statistic if kw else float("nan"), kw.p_value if kw else float("nan")]
        )
    return header, rows


def ingest(config: PipelineConfig) -> tuple[CodingScheme, list[MultichannelSequence]]:
    if config.scheme is not None and not Path(config.scheme).is_file():
        raise SchemaError(f"scheme file not found: {config.scheme}")
    scheme = load_scheme(config.scheme).with_costs(
        indel=config.indel_cost, substitution=config.substitution_cost, indel_mode=config.indel_mode
    )
    if not Path(config.events).is_file():
        raise ValidationError(f"event log not found: {config.events}")
    events = cio.read_events(config.events)
    seqs = build_sequences(events, scheme, config.on_conflict, config.drop_blank)
    for s in seqs:
        s.validate(scheme)
    return scheme, seqs


def run_pipeline(config: PipelineConfig) -> dict:
    """Run every stage and write artifacts plus ``manifest.json`` under ``out_dir``.

    Any failure is re-raised as :class:`StageError` naming the stage.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def stage(name, fn, *args):
        try:
            return fn(*args)
        except StageError:
            raise
        except (CpsError, ValueError, OSError, ArithmeticError) as exc:
            raise StageError(name, exc) from exc

    scheme, seqs = stage("ingest", ingest, config)

    def _ingest_outputs():
        cio.write_sequences_wide(out / "sequences.csv", seqs, scheme.channel_names)
        written.append(out / "sequences.csv")

    stage("ingest", _ingest_outputs)

    D = stage("distances", distance_matrix, seqs, scheme, config.workers, config.normalize)
    cio.write_distance_matrix(out / "distances.csv", D)
    written.append(out / "distances.csv")

    def _cluster():
        dend = ward_cluster(D, config.linkage)
        lo, hi = config.k_range
        ks = [k for k in range(lo, hi + 1) if 2 <= k <= D.n - 1]
        fit = goodness_of_fit(D, dend, ks) if ks else None
        k = config.k if config.k is not None else (fit.suggested_k if fit else 1)
        part = cut_tree(dend, k)
        cio.write_merges(out / "merges.csv", dend)
        cio.write_partition(out / "partition.csv", part)
        if fit:
            cio.write_table(
                out / "cluster_fit.csv",
                ["k", "avg_silhouette", "wss", "height_gap", "suggested"],
                ([r.k, r.avg_silhouette, r.wss, r.height_gap, int(r.k == fit.suggested_k)] for r in fit.rows),
            )
            written.append(out / "cluster_fit.csv")
        (out / "dendrogram.svg").write_text(dendrogram_svg(dend, part), encoding="utf-8")
        (out / "sequence_index.svg").write_text(sequence_index_svg(seqs, scheme, part), encoding="utf-8")
        written.extend(out / f for f in ("merges.csv", "partition.csv", "dendrogram.svg", "sequence_index.svg"))
        return part, fit

    part, fit = stage("cluster", _cluster)

    def _stats():
        table = code_frequencies(seqs, part, scheme)
        comps = compare_clusters(table)
        header, rows = stats_rows(comps, table.clusters, scheme)
        cio.write_table(out / "stats.csv", header, rows)
        cio.write_table(
            out / "frequencies.csv",
            ["session_id", "cluster", *table.codes],
            ([l, table.cluster_of[l], *row] for l, row in zip(table.labels, table.counts.tolist())),
        )
        written.extend([out / "stats.csv", out / "frequencies.csv"])

    stage("stats", _stats)

    def _ena():
        d = out / "ena"
        d.mkdir(exist_ok=True)
        model = fit_ena(seqs, scheme, part, config.window)
        cio.write_table(
            d / "points.csv",
            ["session_id", "cluster", "x", "y", "zero_vector"],
            ([l, part.as_dict()[l], p[0], p[1], int(z)] for l, p, z in zip(model.labels, model.points, model.zero_vector)),
        )
        written.append(d / "points.csv")
        meta = {
            "window": model.window,
            "singular_values": model.singular_values.tolist(),
            "variance_share": model.variance_share.tolist(),
            "centroids": {str(c): v.tolist() for c, v in model.centroids.items()},
            "strong_edges": {
                str(c): [[a, b, w] for (a, b), w in strong_edges(model, c, config.edge_threshold)]
                for c in model.edges
            },
            "edge_threshold": config.edge_threshold,
        }
        _dump_json(d / "ena.json", meta)
        written.append(d / "ena.json")
        for c in sorted(model.edges):
            cio.write_table(
                d / f"edges_type{c}.csv",
                ["code_a", "code_b", "weight"],
                ([a, b, float(w)] for (a, b), w in zip(model.pairs, model.edges[c])),
            )
            (d / f"network_type{c}.svg").write_text(ena_network_svg(model, c), encoding="utf-8")
            written.extend([d / f"edges_type{c}.csv", d / f"network_type{c}.svg"])

    stage("ena", _ena)

    def _hmm():
        d = out / "hmm"
        d.mkdir(exist_ok=True)
        for c in part.clusters:
            members = set(part.members(c))
            cseqs = [s for s in seqs if s.session_id in members]
            sel = select_states(
                cseqs, config.states[0], config.states[1], config.restarts, config.seed,
                config.tol, config.max_iter, scheme=scheme, workers=config.workers,
            )
            cd = d / f"type{c}"
            cd.mkdir(exist_ok=True)
            n_positions = sum(len(s) for s in cseqs)
            doc = {
                "cluster": c,
                "model": sel.best.model.to_dict(scheme),
                "fit": sel.best.summary(),
                "counts": {
                    "positions": n_positions,
                    "positions_x_channels": n_positions * scheme.n_channels,
                    "code_tokens": sum(s.n_codes() for s in cseqs),
                },
            }
            _dump_json(cd / "model.json", doc)
            cio.write_table(
                cd / "bic.csv",
                ["n_states", "log_likelihood", "n_parameters", "n_obs", "bic"],
                ([r["n_states"], r["log_likelihood"], r["n_parameters"], r["n_obs"], r["bic"]] for r in sel.table()),
            )
            rows = []
            for s in cseqs:
                if len(s) == 0:
                    continue
                path, lp = viterbi(sel.best.model, s, scheme)
                rows.append([s.session_id, lp, " ".join(str(int(x) + 1) for x in path)])
            cio.write_table(cd / "viterbi.csv", ["session_id", "log_probability", "path"], rows)
            (cd / "graph.svg").write_text(
                hmm_graph_svg(sel.best.model, scheme, f"Type {c}: {sel.best.model.n_states} states"),
                encoding="utf-8",
            )
            written.extend(cd / f for f in ("model.json", "bic.csv", "viterbi.csv", "graph.svg"))

    stage("hmm", _hmm)

    inputs = {"events": config.events}
    if config.scheme:
        inputs["scheme"] = config.scheme
    if config.scores:
        inputs["scores"] = config.scores

        def _score():
            tallies = cio.read_scores(config.scores)
            totals = {sid: score_concept_map(*t).total for sid, t in tallies.items()}
            cio.write_table(
                out / "scores.csv",
                ["session_id", "propositions", "hierarchies", "examples", "total"],
                ([sid, *tallies[sid], totals[sid]] for sid in tallies),
            )
            rep = cluster_performance(totals, part)
            _dump_json(out / "performance.json", performance_doc(rep))
            written.extend([out / "scores.csv", out / "performance.json"])

        stage("score", _score)

    manifest = {
        "parameters": config.parameters(),
        "inputs": {k: {"path": v, "sha256": sha256_file(v)} for k, v in inputs.items()},
        "scheme": scheme.to_dict(),
        "versions": _versions(),
        "clusters": {"k": part.k, "suggested_k": fit.suggested_k if fit else None},
        "outputs": {str(p.relative_to(out)): sha256_file(p) for p in sorted(written)},
    }
    _dump_json(out / "manifest.json", manifest)
    return manifest


def performance_doc(rep) -> dict:
    return {
        "clusters": {
            str(c): {"mean": rep.means[c], "sd": rep.sds[c], "n": rep.ns[c]} for c in rep.clusters
        },
        "anova": None
        if rep.anova is None
        else {"F": rep.anova.statistic, "df": list(rep.anova.df), "p": rep.anova.p_value},
        "excluded_clusters": rep.excluded,
        "note": rep.note(),
    }
