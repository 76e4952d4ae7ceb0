"""Coding scheme, coded events and multichannel sequence construction.

A :class:`CodingScheme` holds ordered channels, each with an ordered code
alphabet.  Coded events (one per transcribed unit) are grouped by session
and turned into :class:`MultichannelSequence` objects, one aligned track
per channel.  ``MISSING`` marks a position where a channel carries no code.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import SchemaError, ValidationError

#: Sentinel for "no code on this channel at this position".
MISSING = None


@dataclass(frozen=True)
class Channel:
    name: str
    codes: tuple[str, ...]


@dataclass(frozen=True)
class CodingScheme:
    """Ordered channels with disjoint code alphabets and per-channel costs.

    ``indel_mode`` selects how a position is charged when inserted or
    deleted: ``"observed"`` charges only its non-missing entries,
    ``"flat"`` charges every channel regardless.
    """

    channels: tuple[Channel, ...]
    indel_cost: tuple[float, ...] = ()
    substitution_cost: tuple[float, ...] = ()
    indel_mode: str = "observed"
    _code_index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.channels:
            raise SchemaError("scheme has no channels")
        names = [c.name for c in self.channels]
        dup = _first_duplicate(names)
        if dup is not None:
            raise SchemaError(f"duplicate channel name {dup!r}")
        index = {}
        for ci, ch in enumerate(self.channels):
            if not ch.codes:
                raise SchemaError(f"channel {ch.name!r} has an empty alphabet")
            for ki, code in enumerate(ch.codes):
                if not isinstance(code, str) or not code:
                    raise SchemaError(f"invalid code {code!r} in channel {ch.name!r}")
                if code in index:
                    raise SchemaError(f"duplicate code identifier {code!r}")
                index[code] = (ci, ki)
        n = len(self.channels)
        indel = tuple(float(x) for x in self.indel_cost) or (1.0,) * n
        sub = tuple(float(x) for x in self.substitution_cost) or (1.0,) * n
        if len(indel) != n or len(sub) != n:
            raise SchemaError("cost lists must have one entry per channel")
        if any(x < 0 for x in indel + sub):
            raise SchemaError("costs must be nonnegative")
        if self.indel_mode not in ("observed", "flat"):
            raise SchemaError(f"unknown indel mode {self.indel_mode!r}")
        object.__setattr__(self, "indel_cost", indel)
        object.__setattr__(self, "substitution_cost", sub)
        object.__setattr__(self, "_code_index", index)

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def channel_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.channels)

    @property
    def codes(self) -> tuple[str, ...]:
        """All codes in channel order, then alphabet order."""
        return tuple(code for ch in self.channels for code in ch.codes)

    @property
    def alphabet_sizes(self) -> tuple[int, ...]:
        return tuple(len(c.codes) for c in self.channels)

    def locate(self, code: str) -> tuple[int, int]:
        """Return ``(channel index, position in alphabet)`` for ``code``."""
        try:
            return self._code_index[code]
        except KeyError:
            raise ValidationError(f"unknown code {code!r}") from None

    def channel_of(self, code: str) -> int:
        return self.locate(code)[0]

    def with_costs(self, indel=None, substitution=None, indel_mode=None) -> "CodingScheme":
        n = self.n_channels
        if isinstance(indel, (int, float)):
            indel = (float(indel),) * n
        if isinstance(substitution, (int, float)):
            substitution = (float(substitution),) * n
        return CodingScheme(
            self.channels,
            indel if indel is not None else self.indel_cost,
            substitution if substitution is not None else self.substitution_cost,
            indel_mode or self.indel_mode,
        )

    def to_dict(self) -> dict:
        return {
            "channels": [
                {
                    "name": ch.name,
                    "codes": list(ch.codes),
                    "indel_cost": self.indel_cost[i],
                    "substitution_cost": self.substitution_cost[i],
                }
                for i, ch in enumerate(self.channels)
            ],
            "indel_mode": self.indel_mode,
        }


def _first_duplicate(items):
    seen = set()
    for x in items:
        if x in seen:
            return x
        seen.add(x)
    return None


DEFAULT_CHANNELS = (
    ("Interactive", ("Int-C", "Int-B")),
    ("Cognitive", ("KS", "KM", "KD")),
    ("Regulative", ("TU", "GSP", "MR")),
    ("Behavioural", ("RM", "CM", "OB")),
    ("Socio-emotional", ("ALR", "EPI", "FC")),
)


def default_scheme() -> CodingScheme:
    """The five-channel, fourteen-code CPS scheme with unit costs."""
    return CodingScheme(tuple(Channel(n, c) for n, c in DEFAULT_CHANNELS))


def scheme_from_dict(doc: Mapping) -> CodingScheme:
    if not isinstance(doc, Mapping) or "channels" not in doc:
        raise SchemaError("scheme document needs a 'channels' list")
    raw = doc["channels"]
    if not isinstance(raw, list):
        raise SchemaError("'channels' must be a list")
    channels, indel, sub = [], [], []
    for entry in raw:
        if not isinstance(entry, Mapping) or "name" not in entry or "codes" not in entry:
            raise SchemaError(f"malformed channel entry {entry!r}")
        codes = entry["codes"]
        if not isinstance(codes, list):
            raise SchemaError(f"codes of channel {entry['name']!r} must be a list")
        channels.append(Channel(str(entry["name"]), tuple(codes)))
        indel.append(entry.get("indel_cost", doc.get("indel_cost", 1.0)))
        sub.append(entry.get("substitution_cost", doc.get("substitution_cost", 1.0)))
    try:
        indel = [float(x) for x in indel]
        sub = [float(x) for x in sub]
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"non-numeric cost: {exc}") from None
    return CodingScheme(tuple(channels), tuple(indel), tuple(sub), doc.get("indel_mode", "observed"))


def load_scheme(source=None) -> CodingScheme:
    """Load a scheme from a JSON document.

    ``source`` may be ``None`` (built-in default), a path, a JSON string or
    an already-parsed mapping.
    """
    if source is None:
        return default_scheme()
    if isinstance(source, Mapping):
        return scheme_from_dict(source)
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"scheme document does not parse: {exc}") from None
    return scheme_from_dict(doc)


class Modality(str, Enum):
    VERBAL = "verbal"
    BEHAVIOURAL = "behavioural"
    TEXT = "text"


@dataclass(frozen=True)
class CodedEvent:
    session_id: str
    unit_index: int
    actor_id: str
    modality: Modality
    codes: tuple[str, ...]

    def __post_init__(self):
        if int(self.unit_index) != self.unit_index or self.unit_index < 0:
            raise ValidationError(f"unit_index must be a nonnegative integer, got {self.unit_index!r}")
        try:
            object.__setattr__(self, "modality", Modality(self.modality))
        except ValueError:
            raise ValidationError(f"unknown modality {self.modality!r}") from None
        object.__setattr__(self, "codes", tuple(self.codes))


@dataclass(frozen=True)
class MultichannelSequence:
    """One session as ``T`` aligned positions over every channel.

    ``states[c][t]`` is the code on channel ``c`` at position ``t`` or
    ``MISSING``.
    """

    session_id: str
    states: tuple[tuple, ...]

    def __post_init__(self):
        states = tuple(tuple(ch) for ch in self.states)
        if len({len(ch) for ch in states}) > 1:
            raise ValidationError(f"session {self.session_id!r}: channel lengths differ")
        object.__setattr__(self, "states", states)

    def __len__(self):
        return len(self.states[0]) if self.states else 0

    @property
    def length(self) -> int:
        return len(self)

    def position(self, t: int) -> tuple:
        return tuple(ch[t] for ch in self.states)

    def positions(self) -> list[tuple]:
        return [self.position(t) for t in range(len(self))]

    def codes_at(self, t: int) -> list[str]:
        return [s for s in self.position(t) if s is not MISSING]

    def n_codes(self) -> int:
        return sum(s is not MISSING for ch in self.states for s in ch)

    def validate(self, scheme: CodingScheme) -> None:
        if len(self.states) != scheme.n_channels:
            raise ValidationError(
                f"session {self.session_id!r}: {len(self.states)} channels, scheme has {scheme.n_channels}"
            )
        for ci, ch in enumerate(self.states):
            alphabet = set(scheme.channels[ci].codes)
            for t, s in enumerate(ch):
                if s is not MISSING and s not in alphabet:
                    raise ValidationError(
                        f"session {self.session_id!r} position {t}: {s!r} not in channel "
                        f"{scheme.channels[ci].name!r}"
                    )

    def encode(self, scheme: CodingScheme) -> np.ndarray:
        """Integer matrix of shape ``(channels, T)``; ``-1`` for MISSING."""
        out = np.full((scheme.n_channels, len(self)), -1, dtype=np.int64)
        for ci, ch in enumerate(self.states):
            lookup = {code: k for k, code in enumerate(scheme.channels[ci].codes)}
            for t, s in enumerate(ch):
                if s is not MISSING:
                    out[ci, t] = lookup[s]
        return out

    @classmethod
    def from_positions(cls, session_id: str, positions: Sequence[Sequence], n_channels: int):
        if not positions:
            return cls(session_id, tuple(() for _ in range(n_channels)))
        return cls(session_id, tuple(zip(*positions)))


def build_sequences(
    events: Iterable[CodedEvent],
    scheme: CodingScheme,
    on_conflict: str = "error",
    drop_blank: bool = False,
) -> list[MultichannelSequence]:
    """Group events by session and lay their codes out channel by channel.

    Sessions come back in order of first appearance in ``events``; inside a
    session positions follow ``unit_index``.  Two codes of the same channel
    on one event raise unless ``on_conflict="first"``, which keeps the first
    listed.  ``drop_blank`` removes positions carrying no code at all.
    """
    if on_conflict not in ("error", "first"):
        raise ValueError(f"on_conflict must be 'error' or 'first', got {on_conflict!r}")
    sessions: dict[str, list[CodedEvent]] = defaultdict(list)
    for ev in events:
        sessions[ev.session_id].append(ev)

    out = []
    for sid, evs in sessions.items():
        evs = sorted(evs, key=lambda e: e.unit_index)
        for a, b in zip(evs, evs[1:]):
            if a.unit_index == b.unit_index:
                raise ValidationError(f"session {sid!r}: duplicate unit_index {a.unit_index}")
        positions = []
        for ev in evs:
            pos = [MISSING] * scheme.n_channels
            for code in ev.codes:
                try:
                    ci = scheme.channel_of(code)
                except ValidationError:
                    raise ValidationError(
                        f"session {sid!r} unit {ev.unit_index}: unknown code {code!r}"
                    ) from None
                if pos[ci] is not MISSING:
                    if on_conflict == "first":
                        continue
                    raise ValidationError(
                        f"session {sid!r} unit {ev.unit_index}: codes {pos[ci]!r} and {code!r} "
                        f"share channel {scheme.channels[ci].name!r}"
                    )
                pos[ci] = code
            if drop_blank and all(s is MISSING for s in pos):
                continue
            positions.append(tuple(pos))
        out.append(MultichannelSequence.from_positions(sid, positions, scheme.n_channels))
    return out


def sequence_to_events(seq: MultichannelSequence, actor_id: str = "", modality="verbal") -> list[CodedEvent]:
    """Inverse of :func:`build_sequences` for one sequence (unit_index = position)."""
    return [
        CodedEvent(seq.session_id, t, actor_id, modality, tuple(seq.codes_at(t)))
        for t in range(len(seq))
    ]
