import json
import re
from pathlib import Path

import numpy as np
import pytest

from cpsseq import io as cio
from cpsseq.cli import main
from cpsseq.clustering import Partition, cut_tree, ward_cluster
from cpsseq.coding import MultichannelSequence, build_sequences
from cpsseq.render import sequence_index_svg
from cpsseq.seqdist import distance_matrix
from cpsseq.synthetic import corpus_events, planted_corpus

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    seqs, truth = planted_corpus(sizes=(3, 4, 3), length=20, seed=1)
    cio.write_events(d / "events.csv", corpus_events(seqs, seed=1))
    with open(d / "scores.csv", "w") as fh:
        fh.write("session_id,propositions,hierarchies,examples\n")
        for i, s in enumerate(seqs):
            fh.write(f"{s.session_id},{10 + i},{i % 3},{i % 4}\n")
    return d, seqs, truth


def tiny_corpus():
    return [
        MultichannelSequence.from_positions(
            "g1", [("Int-C", "KS", None, "CM", None), (None, None, "TU", "OB", None), ("Int-B", None, None, None, "FC")], 5
        ),
        MultichannelSequence.from_positions("g2", [(None,) * 5, ("Int-C", "KM", "GSP", "RM", "ALR")], 5),
    ]


def test_events_round_trip(tmp_path, scheme, corpus):
    _, seqs, _ = corpus
    events = corpus_events(seqs, seed=4)
    cio.write_events(tmp_path / "e.csv", events)
    back = cio.read_events(tmp_path / "e.csv")
    assert back == events
    assert [s.states for s in build_sequences(back, scheme)] == [s.states for s in seqs]


def test_events_bad_header(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("session,unit\n1,2\n")
    with pytest.raises(ValueError):
        cio.read_events(p)


def test_events_bad_row_names_line(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("session_id,unit_index,actor_id,modality,codes\ng,0,p1,verbal,KS\ng,x,p1,verbal,KS\n")
    with pytest.raises(ValueError, match="line 3"):
        cio.read_events(p)


def test_distance_matrix_round_trip_is_exact(tmp_path, scheme, corpus):
    _, seqs, _ = corpus
    D = distance_matrix(seqs, scheme, normalize="maxlen")
    cio.write_distance_matrix(tmp_path / "d.csv", D)
    back = cio.read_distance_matrix(tmp_path / "d.csv")
    assert back.labels == D.labels
    assert back.values.tobytes() == D.values.tobytes()


def test_partition_and_merges_round_trip(tmp_path, scheme, corpus):
    _, seqs, _ = corpus
    D = distance_matrix(seqs, scheme)
    dend = ward_cluster(D)
    part = cut_tree(dend, 3)
    cio.write_partition(tmp_path / "p.csv", part)
    cio.write_merges(tmp_path / "m.csv", dend)
    assert cio.read_partition(tmp_path / "p.csv") == part
    back = cio.read_merges(tmp_path / "m.csv", D.labels)
    assert back.merges == dend.merges


def test_fmt_keeps_full_precision():
    x = 0.1 + 0.2
    assert float(cio.fmt(x)) == x


def test_sequence_index_shape(scheme):
    s = MultichannelSequence.from_positions("one", [("Int-C", "KS", "TU", "RM", "ALR")] * 3, 5)
    svg = sequence_index_svg([s], scheme)
    colored = [m for m in re.findall(r'<rect x="(\S+)" y="(\S+)" width="4" height="8" fill="(#\w+)" stroke="none"', svg)]
    # 5 channel rows of 3 cells each
    assert len({y for _, y, _ in colored}) == 5
    assert len(colored) == 15


def test_sequence_index_all_missing_is_blank(scheme):
    s = MultichannelSequence.from_positions("blank", [(None,) * 5] * 4, 5)
    svg = sequence_index_svg([s], scheme)
    assert not re.search(r'width="4" height="8" fill="#\w+" stroke="none"', svg)


def test_sequence_index_golden(scheme):
    seqs = tiny_corpus()
    svg = sequence_index_svg(seqs, scheme, Partition(["g1", "g2"], [1, 2]))
    assert svg == (GOLDEN / "sequence_index_tiny.svg").read_text(encoding="utf-8")


def test_cli_ingest(corpus, tmp_path, capsys):
    d, seqs, _ = corpus
    assert main(["ingest", "--events", str(d / "events.csv"), "--out", str(tmp_path)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert [r["session_id"] for r in doc["sequences"]] == [s.session_id for s in seqs]
    assert (tmp_path / "sequences.csv").exists()


def test_cli_unknown_code_is_validation_exit(tmp_path, capsys):
    p = tmp_path / "e.csv"
    p.write_text("session_id,unit_index,actor_id,modality,codes\ng,0,p1,verbal,NOPE\n")
    assert main(["ingest", "--events", str(p), "--out", str(tmp_path / "o")]) == 1
    assert "NOPE" in capsys.readouterr().err


def test_cli_reliability(tmp_path, capsys):
    p = tmp_path / "r.csv"
    p.write_text("unit_id,channel,r1,r2\nu1,Cognitive,KS,KS\nu2,Cognitive,KM,KS\nu1,Behavioural,CM,CM\nu2,Behavioural,OB,OB\n")
    assert main(["reliability", "--ratings", str(p)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(doc) == {"Cognitive", "Behavioural", "pooled"}
    assert doc["Behavioural"]["alpha"] == 1.0


def test_cli_distances_cluster_stats_ena_render(corpus, tmp_path, capsys):
    d, seqs, truth = corpus
    ev = ["--events", str(d / "events.csv")]
    assert main(["distances", *ev, "--out", str(tmp_path / "d.csv")]) == 0
    assert main(["cluster", "--distances", str(tmp_path / "d.csv"), "--k-range", "2:5", "--out", str(tmp_path / "c")]) == 0
    part = cio.read_partition(tmp_path / "c" / "partition.csv")
    assert part.k == 3
    for name in ("merges.csv", "cluster_fit.csv", "dendrogram.svg"):
        assert (tmp_path / "c" / name).exists()
    pp = str(tmp_path / "c" / "partition.csv")
    assert main(["stats", *ev, "--partition", pp, "--out", str(tmp_path / "stats.csv")]) == 0
    header, rows = cio.read_table(tmp_path / "stats.csv")
    assert header[:2] == ["channel", "code"] and len(rows) == 14
    assert main(["ena", *ev, "--partition", pp, "--window", "3", "--out", str(tmp_path / "ena")]) == 0
    assert sorted(p.name for p in (tmp_path / "ena").iterdir()) == sorted(
        ["points.csv"] + [f"edges_type{c}.csv" for c in (1, 2, 3)] + [f"network_type{c}.svg" for c in (1, 2, 3)]
    )
    assert main(["render", *ev, "--partition", pp, "--out", str(tmp_path / "idx.svg")]) == 0
    assert (tmp_path / "idx.svg").read_text().startswith("<svg")


def test_cli_hmm(corpus, tmp_path):
    d, _, _ = corpus
    args = ["hmm", "--events", str(d / "events.csv"), "--states", "2:3", "--restarts", "2", "--max-iter", "50"]
    assert main([*args, "--out", str(tmp_path)]) == 0
    bic_header, bic_rows = cio.read_table(tmp_path / "type1" / "bic.csv")
    assert [int(r[0]) for r in bic_rows] == [2, 3]
    doc = json.loads((tmp_path / "type1" / "model.json").read_text())
    assert doc["fit"]["restarts_run"] == 2
    assert (tmp_path / "type1" / "graph.svg").exists()


def test_cli_score(corpus, tmp_path, capsys):
    d, seqs, truth = corpus
    part = Partition(list(truth), list(truth.values()))
    cio.write_partition(tmp_path / "p.csv", part)
    assert main(["score", "--scores", str(d / "scores.csv"), "--partition", str(tmp_path / "p.csv"), "--out", str(tmp_path / "s.csv")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert "note" in doc
    _, rows = cio.read_table(tmp_path / "s.csv")
    assert rows[0][-1] == str(10 + 0 + 0)


def test_cli_run_missing_scheme_names_ingest(corpus, tmp_path, capsys):
    d, _, _ = corpus
    code = main(["run", "--events", str(d / "events.csv"), "--scheme", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")])
    assert code != 0
    assert "'ingest'" in capsys.readouterr().err


def test_cli_bad_range_is_usage_error():
    with pytest.raises(SystemExit):
        main(["cluster", "--distances", "x", "--k-range", "5:2", "--out", "y"])
