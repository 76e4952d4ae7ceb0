"""Synthetic coded corpora with a planted cluster structure.

Each planted type has a prototype sequence drawn from its own code
preferences; members are copies with a few positions perturbed and a small
random length change.  Useful for demos and for checking that clustering
recovers the planting.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .coding import MISSING, CodedEvent, CodingScheme, MultichannelSequence, default_scheme, sequence_to_events


def _prototype(scheme: CodingScheme, length: int, favourite: Sequence[int], rng) -> list[tuple]:
    positions = []
    for _ in range(length):
        pos = []
        for ci, ch in enumerate(scheme.channels):
            if rng.random() < 0.45:
                pos.append(MISSING)
                continue
            k = favourite[ci] if rng.random() < 0.8 else rng.integers(len(ch.codes))
            pos.append(ch.codes[int(k)])
        positions.append(tuple(pos))
    return positions


def planted_corpus(
    sizes: Sequence[int] = (5, 14, 5),
    length: int = 40,
    noise: int = 1,
    seed: int = 0,
    scheme: CodingScheme | None = None,
    length_jitter: int = 0,
) -> tuple[list[MultichannelSequence], dict[str, int]]:
    """Sequences plus their planted type (1-based), ids ``S01``, ``S02``, ...

    Every member substitutes ``noise`` observed codes of its prototype at
    positions no other member of its type touches, so members sit roughly
    equidistant from each other.  ``length_jitter`` trims up to that many
    trailing positions.  Member ids are interleaved across types.
    """
    scheme = scheme or default_scheme()
    rng = np.random.default_rng(seed)
    protos = []
    for t in range(len(sizes)):
        fav = [(t + ci) % len(ch.codes) for ci, ch in enumerate(scheme.channels)]
        protos.append(_prototype(scheme, length, fav, rng))
    if max(sizes) * noise > length:
        raise ValueError("length too short for unique perturbation sites")
    sites = {t: iter(rng.permutation(length).tolist()) for t in range(len(sizes))}
    slots = [t for t, n in enumerate(sizes) for _ in range(n)]
    rng.shuffle(slots)
    seqs, truth = [], {}
    width = len(str(len(slots)))
    for i, t in enumerate(slots):
        pos = list(protos[t])
        for _ in range(noise):
            p = next(sites[t])
            row = list(pos[p])
            observed = [c for c, x in enumerate(row) if x is not MISSING]
            if not observed:
                continue
            ci = observed[int(rng.integers(len(observed)))]
            alphabet = [x for x in scheme.channels[ci].codes if x != row[ci]]
            if alphabet:
                row[ci] = alphabet[int(rng.integers(len(alphabet)))]
            pos[p] = tuple(row)
        if length_jitter:
            drop = int(rng.integers(0, length_jitter + 1))
            pos = pos[: len(pos) - drop]
        sid = f"S{i + 1:0{width}d}"
        seqs.append(MultichannelSequence.from_positions(sid, pos, scheme.n_channels))
        truth[sid] = t + 1
    return seqs, truth


def corpus_events(seqs: Sequence[MultichannelSequence], seed: int = 0) -> list[CodedEvent]:
    """Event rows for ``seqs`` with actors, modalities and gapped unit indices."""
    rng = np.random.default_rng(seed)
    events = []
    for s in seqs:
        for ev in sequence_to_events(s):
            modality = "behavioural" if any(c in ("RM", "CM", "OB", "Int-B") for c in ev.codes) else "verbal"
            events.append(
                CodedEvent(s.session_id, 3 * ev.unit_index + 1, f"P{int(rng.integers(1, 5))}", modality, ev.codes)
            )
    return events
