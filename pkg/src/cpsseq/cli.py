"""Command-line entry point.

Exit codes: 0 success, 1 validation error, 2 computation error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import io as cio
from .clustering import cut_tree, goodness_of_fit, ward_cluster
from .coding import build_sequences, load_scheme
from .ena import DEFAULT_WINDOW, fit_ena, strong_edges
from .errors import ComputationError, CpsError
from .hmm import select_states, viterbi
from .pipeline import PipelineConfig, StageError, performance_doc, run_pipeline, stats_rows
from .reliability import channelwise_alpha, krippendorff_alpha, table_from_rows
from .render import dendrogram_svg, ena_network_svg, hmm_graph_svg, sequence_index_svg
from .scoring import cluster_performance, score_concept_map
from .seqdist import distance_matrix
from .stats import code_frequencies, compare_clusters


def _range(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition(":")
    try:
        lo_i = int(lo)
        hi_i = int(hi) if hi else lo_i
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or N:M, got {text!r}") from None
    if lo_i > hi_i:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return lo_i, hi_i


def _add_input(p, partition=False):
    p.add_argument("--events", required=True, help="event log CSV")
    p.add_argument("--scheme", help="scheme JSON (default: built-in five-channel scheme)")
    p.add_argument("--on-conflict", choices=["error", "first"], default="error")
    p.add_argument("--drop-blank", action="store_true", help="drop positions with no code")
    if partition:
        p.add_argument("--partition", required=True, help="partition CSV (session_id,cluster)")


def _add_costs(p):
    p.add_argument("--indel-cost", type=float)
    p.add_argument("--substitution-cost", type=float)
    p.add_argument("--indel-mode", choices=["observed", "flat"], default="observed")
    p.add_argument("--normalize", choices=["none", "maxlen"], default="none")


def _load(args):
    scheme = load_scheme(args.scheme)
    if hasattr(args, "indel_mode"):
        scheme = scheme.with_costs(args.indel_cost, args.substitution_cost, args.indel_mode)
    seqs = build_sequences(cio.read_events(args.events), scheme, args.on_conflict, args.drop_blank)
    return scheme, seqs


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_ingest(args):
    scheme, seqs = _load(args)
    out = _out(args)
    cio.write_sequences_wide(out / "sequences.csv", seqs, scheme.channel_names)
    summary = [{"session_id": s.session_id, "length": len(s), "codes": s.n_codes()} for s in seqs]
    json.dump({"sequences": summary, "scheme": scheme.to_dict()}, sys.stdout, indent=2)
    print()


def cmd_reliability(args):
    raters, groups = cio.read_ratings(args.ratings)
    if list(groups) == [None]:
        res = {"overall": krippendorff_alpha(table_from_rows(groups[None]))}
    else:
        res = channelwise_alpha({k: table_from_rows(v) for k, v in groups.items()})
    json.dump({k: v.to_dict() for k, v in res.items()}, sys.stdout, indent=2)
    print()


def cmd_distances(args):
    scheme, seqs = _load(args)
    D = distance_matrix(seqs, scheme, args.workers, None if args.normalize == "none" else args.normalize)
    if args.out:
        cio.write_distance_matrix(args.out, D)
    else:
        cio.write_distance_matrix("/dev/stdout", D)


def cmd_cluster(args):
    D = cio.read_distance_matrix(args.distances)
    dend = ward_cluster(D, args.linkage)
    out = _out(args)
    fit = None
    if args.k_range:
        lo, hi = args.k_range
        fit = goodness_of_fit(D, dend, range(lo, hi + 1))
        cio.write_table(
            out / "cluster_fit.csv",
            ["k", "avg_silhouette", "wss", "height_gap", "suggested"],
            ([r.k, r.avg_silhouette, r.wss, r.height_gap, int(r.k == fit.suggested_k)] for r in fit.rows),
        )
        if fit.no_structure:
            print("warning: average silhouette below 0.25 for every k; no clear structure", file=sys.stderr)
    k = args.k if args.k is not None else (fit.suggested_k if fit else 1)
    part = cut_tree(dend, k)
    cio.write_merges(out / "merges.csv", dend)
    cio.write_partition(out / "partition.csv", part)
    (out / "dendrogram.svg").write_text(dendrogram_svg(dend, part), encoding="utf-8")
    print(f"k = {k}; sizes = {[len(part.members(c)) for c in part.clusters]}")


def cmd_stats(args):
    scheme, seqs = _load(args)
    part = cio.read_partition(args.partition)
    table = code_frequencies(seqs, part, scheme)
    header, rows = stats_rows(compare_clusters(table), table.clusters, scheme)
    cio.write_table(args.out, header, rows)


def cmd_ena(args):
    scheme, seqs = _load(args)
    part = cio.read_partition(args.partition)
    model = fit_ena(seqs, scheme, part, args.window)
    out = _out(args)
    cio.write_table(
        out / "points.csv",
        ["session_id", "cluster", "x", "y", "zero_vector"],
        ([l, part.as_dict()[l], p[0], p[1], int(z)] for l, p, z in zip(model.labels, model.points, model.zero_vector)),
    )
    for c in sorted(model.edges):
        cio.write_table(
            out / f"edges_type{c}.csv",
            ["code_a", "code_b", "weight"],
            ([a, b, float(w)] for (a, b), w in zip(model.pairs, model.edges[c])),
        )
        (out / f"network_type{c}.svg").write_text(ena_network_svg(model, c), encoding="utf-8")
        strong = strong_edges(model, c, args.threshold)
        print(f"Type {c}: " + ", ".join(f"{a}-{b} {w:.2f}" for (a, b), w in strong))


def cmd_hmm(args):
    scheme, seqs = _load(args)
    out = _out(args)
    groups = {1: seqs}
    if args.partition:
        part = cio.read_partition(args.partition)
        groups = {c: [s for s in seqs if s.session_id in set(part.members(c))] for c in part.clusters}
    for c, cseqs in groups.items():
        sel = select_states(
            cseqs, args.states[0], args.states[1], args.restarts, args.seed, args.tol, args.max_iter,
            scheme=scheme, workers=args.workers,
        )
        cd = out / f"type{c}"
        cd.mkdir(exist_ok=True)
        doc = {"cluster": c, "model": sel.best.model.to_dict(scheme), "fit": sel.best.summary()}
        (cd / "model.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        cio.write_table(
            cd / "bic.csv",
            ["n_states", "log_likelihood", "n_parameters", "n_obs", "bic"],
            ([r["n_states"], r["log_likelihood"], r["n_parameters"], r["n_obs"], r["bic"]] for r in sel.table()),
        )
        rows = []
        for s in cseqs:
            if len(s):
                path, lp = viterbi(sel.best.model, s, scheme)
                rows.append([s.session_id, lp, " ".join(str(int(x) + 1) for x in path)])
        cio.write_table(cd / "viterbi.csv", ["session_id", "log_probability", "path"], rows)
        (cd / "graph.svg").write_text(hmm_graph_svg(sel.best.model, scheme, f"Type {c}"), encoding="utf-8")
        print(f"Type {c}: {sel.best.model.n_states} states, BIC {sel.best.bic:.2f}")


def cmd_score(args):
    tallies = cio.read_scores(args.scores)
    totals = {sid: score_concept_map(*t).total for sid, t in tallies.items()}
    rows = [[sid, *tallies[sid], totals[sid]] for sid in tallies]
    header = ["session_id", "propositions", "hierarchies", "examples", "total"]
    if args.out:
        cio.write_table(args.out, header, rows)
    if args.partition:
        rep = cluster_performance(totals, cio.read_partition(args.partition))
        json.dump(performance_doc(rep), sys.stdout, indent=2)
        print()
    elif not args.out:
        cio.write_table("/dev/stdout", header, rows)


def cmd_render(args):
    scheme, seqs = _load(args)
    part = cio.read_partition(args.partition) if args.partition else None
    Path(args.out).write_text(sequence_index_svg(seqs, scheme, part), encoding="utf-8")


def cmd_run(args):
    if args.config:
        doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        for key in ("k_range", "states"):
            if key in doc:
                doc[key] = tuple(doc[key])
        config = PipelineConfig(**doc)
    else:
        config = PipelineConfig(
            events=args.events, out_dir=args.out, scheme=args.scheme, scores=args.scores,
            on_conflict=args.on_conflict, drop_blank=args.drop_blank,
            indel_cost=args.indel_cost, substitution_cost=args.substitution_cost, indel_mode=args.indel_mode,
            normalize=None if args.normalize == "none" else args.normalize, linkage=args.linkage,
            k=args.k, k_range=args.k_range, window=args.window, edge_threshold=args.threshold,
            states=args.states, restarts=args.restarts, seed=args.seed, tol=args.tol,
            max_iter=args.max_iter, workers=args.workers,
        )
    manifest = run_pipeline(config)
    print(f"wrote {len(manifest['outputs'])} artifacts to {config.out_dir}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cpsseq", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate an event log and write channel sequences")
    _add_input(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("reliability", help="Krippendorff's alpha from a rater CSV")
    p.add_argument("--ratings", required=True)
    p.set_defaults(func=cmd_reliability)

    p = sub.add_parser("distances", help="optimal-matching distance matrix")
    _add_input(p)
    _add_costs(p)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_distances)

    p = sub.add_parser("cluster", help="Ward clustering of a distance matrix")
    p.add_argument("--distances", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--k-range", type=_range)
    p.add_argument("--linkage", choices=["ward2", "ward1"], default="ward2")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("stats", help="per-cluster code frequencies and tests")
    _add_input(p, partition=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("ena", help="epistemic network per cluster")
    _add_input(p, partition=True)
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW)
    p.add_argument("--threshold", type=float, default=0.40)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ena)

    p = sub.add_parser("hmm", help="hidden Markov models with BIC state selection")
    _add_input(p)
    p.add_argument("--partition")
    p.add_argument("--states", type=_range, default=(2, 9))
    p.add_argument("--restarts", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_hmm)

    p = sub.add_parser("score", help="concept-map rubric totals and cluster comparison")
    p.add_argument("--scores", required=True)
    p.add_argument("--partition")
    p.add_argument("--out")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("render", help="sequence index plot")
    _add_input(p)
    p.add_argument("--partition")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("run", help="full pipeline")
    p.add_argument("--config", help="JSON with PipelineConfig fields; overrides other flags")
    p.add_argument("--events")
    p.add_argument("--scheme")
    p.add_argument("--scores")
    p.add_argument("--out")
    p.add_argument("--on-conflict", choices=["error", "first"], default="error")
    p.add_argument("--drop-blank", action="store_true")
    _add_costs(p)
    p.add_argument("--linkage", choices=["ward2", "ward1"], default="ward2")
    p.add_argument("--k", type=int)
    p.add_argument("--k-range", type=_range, default=(2, 6))
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW)
    p.add_argument("--threshold", type=float, default=0.40)
    p.add_argument("--states", type=_range, default=(2, 9))
    p.add_argument("--restarts", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "run" and not args.config and not (args.events and args.out):
        parser.error("run needs --config or both --events and --out")
    try:
        args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ComputationError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CpsError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
