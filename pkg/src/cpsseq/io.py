"""CSV readers and writers for every artifact the toolkit produces.

Event log columns: ``session_id,unit_index,actor_id,modality,codes`` with
codes joined by ``|``.  Numbers are written with 17 significant digits so
files round-trip exactly.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .clustering import Dendrogram, Partition
from .coding import CodedEvent, MultichannelSequence, sequence_to_events
from .errors import SchemaError, ValidationError
from .seqdist import DistanceMatrix

EVENT_HEADER = ["session_id", "unit_index", "actor_id", "modality", "codes"]
CODE_SEP = "|"


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if x != x:
        return "nan"
    if x in (float("inf"), float("-inf")):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _write_rows(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8-sig") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty file")
    return [h.strip() for h in rows[0]], [r for r in rows[1:] if any(c.strip() for c in r)]


def parse_events(header: Sequence[str], rows: Iterable[Sequence[str]], source: str = "<events>") -> list[CodedEvent]:
    missing = [h for h in EVENT_HEADER if h not in header]
    if missing:
        raise SchemaError(f"{source}: missing column(s) {', '.join(missing)}")
    col = {h: header.index(h) for h in EVENT_HEADER}
    events = []
    for line, r in enumerate(rows, start=2):
        try:
            codes = tuple(c.strip() for c in r[col["codes"]].split(CODE_SEP) if c.strip())
            events.append(
                CodedEvent(
                    r[col["session_id"]].strip(),
                    int(r[col["unit_index"]]),
                    r[col["actor_id"]].strip(),
                    r[col["modality"]].strip(),
                    codes,
                )
            )
        except (ValueError, IndexError) as exc:
            raise ValidationError(f"{source} line {line}: {exc}") from None
    return events


def read_events(path) -> list[CodedEvent]:
    header, rows = _read_rows(path)
    return parse_events(header, rows, str(path))


def write_events(path, events: Iterable[CodedEvent]) -> None:
    _write_rows(
        path,
        EVENT_HEADER,
        (
            [e.session_id, e.unit_index, e.actor_id, e.modality.value, CODE_SEP.join(e.codes)]
            for e in events
        ),
    )


def write_sequences_as_events(path, seqs: Sequence[MultichannelSequence]) -> None:
    write_events(path, (e for s in seqs for e in sequence_to_events(s)))


def write_sequences_wide(path, seqs: Sequence[MultichannelSequence], channel_names: Sequence[str]) -> None:
    rows = []
    for s in seqs:
        for t in range(len(s)):
            rows.append([s.session_id, t] + ["" if x is None else x for x in s.position(t)])
    _write_rows(path, ["session_id", "position", *channel_names], rows)


def write_distance_matrix(path, D: DistanceMatrix) -> None:
    _write_rows(path, ["", *D.labels], ([l, *map(fmt, row)] for l, row in zip(D.labels, D.values)))


def read_distance_matrix(path) -> DistanceMatrix:
    header, rows = _read_rows(path)
    labels = header[1:]
    if [r[0] for r in rows] != labels:
        raise SchemaError(f"{path}: row labels do not match column labels")
    values = np.array([[float(x) for x in r[1:]] for r in rows])
    return DistanceMatrix(labels, values)


def write_partition(path, part: Partition) -> None:
    _write_rows(path, ["session_id", "cluster"], zip(part.labels, part.assignment))


def read_partition(path) -> Partition:
    header, rows = _read_rows(path)
    if header[:2] != ["session_id", "cluster"]:
        raise SchemaError(f"{path}: expected columns session_id,cluster")
    return Partition([r[0] for r in rows], [int(r[1]) for r in rows])


def write_merges(path, dend: Dendrogram) -> None:
    _write_rows(
        path,
        ["step", "left", "right", "height", "size"],
        ([m, l, r, fmt(h), s] for m, (l, r, h, s) in enumerate(dend.merges)),
    )


def read_merges(path, labels: Sequence[str], linkage: str = "ward2") -> Dendrogram:
    _, rows = _read_rows(path)
    merges = [(int(r[1]), int(r[2]), float(r[3]), int(r[4])) for r in rows]
    return Dendrogram(list(labels), merges, linkage)


def write_table(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    _write_rows(path, header, ([fmt(x) if isinstance(x, (float, np.floating)) else x for x in r] for r in rows))


def read_table(path) -> tuple[list[str], list[list[str]]]:
    return _read_rows(path)


SCORE_HEADER = ["session_id", "propositions", "hierarchies", "examples"]


def read_scores(path) -> dict[str, tuple[int, int, int]]:
    header, rows = _read_rows(path)
    if header[:4] != SCORE_HEADER:
        raise SchemaError(f"{path}: expected columns {','.join(SCORE_HEADER)}")
    out = {}
    for line, r in enumerate(rows, start=2):
        try:
            out[r[0].strip()] = (int(r[1]), int(r[2]), int(r[3]))
        except (ValueError, IndexError) as exc:
            raise ValidationError(f"{path} line {line}: {exc}") from None
    return out


def read_ratings(path):
    """Rater CSV: ``unit_id,[channel,]rater_1,rater_2,...``; blank = not rated.

    Returns ``{None: rows}`` without a channel column, else ``{channel: rows}``
    where each row is ``(unit_id, rating, rating, ...)``.
    """
    header, rows = _read_rows(path)
    has_channel = len(header) > 1 and header[1] == "channel"
    first = 2 if has_channel else 1
    if len(header) - first < 2:
        raise SchemaError(f"{path}: need at least two rater columns")
    out: dict = {}
    for r in rows:
        r = r + [""] * (len(header) - len(r))
        key = r[1].strip() if has_channel else None
        out.setdefault(key, []).append([r[0].strip()] + [c.strip() for c in r[first:]])
    return header[first:], out
