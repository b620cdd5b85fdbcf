"""Sequence data model, alphabet management, and format conversion.

A cohort is a set of equal-length categorical state sequences observed on
a fixed time grid (one position per week, month, ...). States come from a
finite alphabet; internally every state is stored as its integer index
into the alphabet. Alphabet order is declaration order (or first
appearance when inferred), never lexicographic, so transition-matrix rows
match the order the user declared.

Two on-disk layouts are supported:

* wide CSV: header row with an id column followed by one state column per
  time position (column order is time order);
* spell CSV: columns ``id,state,start,duration``, one row per maximal run
  of a repeated state, 1-based start times.

Time positions are 1-based in files and error messages, 0-based in code.
All types in this module are immutable after construction.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ValidationError

MAX_ALPHABET_SIZE = 255  # state codes are stored as uint8


@dataclass(frozen=True)
class Alphabet:
    """The finite set of states a sequence may visit.

    ``states`` holds the canonical identifiers; ``labels`` and ``colors``
    are optional display metadata keyed by identifier.
    """

    states: tuple[str, ...]
    labels: dict[str, str] = field(default_factory=dict)
    colors: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.states:
            raise ValidationError("alphabet must contain at least one state")
        if len(self.states) > MAX_ALPHABET_SIZE:
            raise ValidationError(
                f"alphabet has {len(self.states)} states, maximum is {MAX_ALPHABET_SIZE}"
            )
        seen = set()
        for s in self.states:
            if not s:
                raise ValidationError("state identifiers must be non-empty")
            if s in seen:
                raise ValidationError(f"duplicate state identifier {s!r}")
            seen.add(s)
        for key in (*self.labels, *self.colors):
            if key not in seen:
                raise ValidationError(f"metadata refers to unknown state {key!r}")
        object.__setattr__(self, "states", tuple(self.states))

    @property
    def size(self) -> int:
        return len(self.states)

    def index(self, token: str) -> int:
        try:
            return self.states.index(token)
        except ValueError:
            raise ValidationError(f"unknown state token {token!r}") from None

    def label(self, i: int) -> str:
        state = self.states[i]
        return self.labels.get(state, state)

    def to_json(self) -> str:
        doc: dict = {"states": list(self.states)}
        if self.labels:
            doc["labels"] = dict(self.labels)
        if self.colors:
            doc["colors"] = dict(self.colors)
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Alphabet":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid alphabet JSON: {exc}") from None
        if not isinstance(doc, dict) or "states" not in doc:
            raise ValidationError('alphabet JSON must be an object with a "states" list')
        return cls(
            states=tuple(str(s) for s in doc["states"]),
            labels=dict(doc.get("labels", {})),
            colors=dict(doc.get("colors", {})),
        )


@dataclass(frozen=True)
class StateSequence:
    """One subject's ordered states, as alphabet indices."""

    subject_id: str
    states: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.states) < 1:
            raise ValidationError(f"sequence {self.subject_id!r} is empty")
        object.__setattr__(self, "states", tuple(int(s) for s in self.states))

    def __len__(self) -> int:
        return len(self.states)

    def tokens(self, alphabet: Alphabet) -> tuple[str, ...]:
        return tuple(alphabet.states[i] for i in self.states)


@dataclass(frozen=True)
class SpellRecord:
    """A maximal run of one repeated state: ``state`` from time ``start``
    (1-based) lasting ``duration`` time units."""

    subject_id: str
    state: str
    start: int
    duration: int

    def __post_init__(self) -> None:
        if self.start < 1:
            raise ValidationError(
                f"spell for {self.subject_id!r}: start must be >= 1, got {self.start}"
            )
        if self.duration < 1:
            raise ValidationError(
                f"spell for {self.subject_id!r}: duration must be >= 1, got {self.duration}"
            )


@dataclass(frozen=True)
class SequenceSet:
    """An aligned cohort of sequences over one alphabet.

    All sequences must have the same length; unequal lengths are rejected
    at construction (several position-wise metrics require alignment).
    """

    alphabet: Alphabet
    sequences: tuple[StateSequence, ...]
    granularity_label: str = "week"

    def __post_init__(self) -> None:
        if not self.sequences:
            raise ValidationError("a sequence set needs at least one sequence")
        object.__setattr__(self, "sequences", tuple(self.sequences))
        length = len(self.sequences[0])
        a = self.alphabet.size
        for seq in self.sequences:
            if len(seq) != length:
                raise ValidationError(
                    f"unequal sequence lengths: {seq.subject_id!r} has {len(seq)} "
                    f"positions, expected {length}"
                )
            for s in seq.states:
                if s < 0 or s >= a:
                    raise ValidationError(
                        f"sequence {seq.subject_id!r} contains state index {s}, "
                        f"alphabet has {a} states"
                    )

    @property
    def n(self) -> int:
        return len(self.sequences)

    @property
    def length(self) -> int:
        return len(self.sequences[0])

    @property
    def subject_ids(self) -> tuple[str, ...]:
        return tuple(seq.subject_id for seq in self.sequences)

    @property
    def codes(self) -> np.ndarray:
        """The (n, T) uint8 matrix of state indices. Cached, read-only."""
        cached = self.__dict__.get("_codes")
        if cached is None:
            cached = np.array([seq.states for seq in self.sequences], dtype=np.uint8)
            cached.setflags(write=False)
            self.__dict__["_codes"] = cached
        return cached

    def __iter__(self) -> Iterator[StateSequence]:
        return iter(self.sequences)


def _rows_from(source: str | Iterable[str]) -> list[list[str]]:
    if isinstance(source, str):
        source = io.StringIO(source)
    return [row for row in csv.reader(source) if row]


def parse_wide(
    source: str | Iterable[str],
    id_column: str = "id",
    state_columns: Sequence[str] | None = None,
    alphabet: Alphabet | None = None,
    granularity_label: str = "week",
) -> SequenceSet:
    """Parse wide-format delimited text into a SequenceSet.

    ``source`` is CSV text or an iterable of lines. The header must
    contain ``id_column``; ``state_columns`` defaults to every other
    column, in header order, which defines time order. When ``alphabet``
    is omitted it is inferred from the distinct cell values in
    first-appearance order (scanning rows top to bottom, left to right),
    which makes inference deterministic for a given input.
    """
    rows = _rows_from(source)
    if not rows:
        raise ValidationError("empty input: no header row")
    header = rows[0]
    if id_column not in header:
        raise ValidationError(f"id column {id_column!r} not found in header {header}")
    id_pos = header.index(id_column)
    if state_columns is None:
        state_cols = [(i, name) for i, name in enumerate(header) if i != id_pos]
    else:
        state_cols = []
        for name in state_columns:
            if name not in header:
                raise ValidationError(f"state column {name!r} not found in header")
            state_cols.append((header.index(name), name))
    if not state_cols:
        raise ValidationError("no state columns")

    if len(rows) < 2:
        raise ValidationError("no data rows")

    tokens_by_row: list[tuple[str, list[str]]] = []
    seen_ids: set[str] = set()
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ValidationError(
                f"row {r}: expected {len(header)} cells, got {len(row)} (ragged row)"
            )
        subject_id = row[id_pos]
        if subject_id in seen_ids:
            raise ValidationError(f"row {r}: duplicate subject id {subject_id!r}")
        seen_ids.add(subject_id)
        tokens_by_row.append((subject_id, [row[i] for i, _ in state_cols]))

    if alphabet is None:
        order: list[str] = []
        known: set[str] = set()
        for _, toks in tokens_by_row:
            for tok in toks:
                if tok not in known:
                    known.add(tok)
                    order.append(tok)
        alphabet = Alphabet(states=tuple(order))

    index = {s: i for i, s in enumerate(alphabet.states)}
    sequences = []
    for r, (subject_id, toks) in enumerate(tokens_by_row, start=2):
        states = []
        for (_, col_name), tok in zip(state_cols, toks):
            try:
                states.append(index[tok])
            except KeyError:
                raise ValidationError(
                    f"row {r}, column {col_name!r}: unknown state token {tok!r}"
                ) from None
        sequences.append(StateSequence(subject_id=subject_id, states=tuple(states)))
    return SequenceSet(
        alphabet=alphabet,
        sequences=tuple(sequences),
        granularity_label=granularity_label,
    )


def spells_to_wide(
    spells: Sequence[SpellRecord],
    alphabet: Alphabet,
    granularity_label: str = "week",
) -> SequenceSet:
    """Expand spell records into a wide SequenceSet.

    Per subject, spells must be contiguous from time 1 (no gaps, no
    overlaps) and every subject must end at the same total duration.
    Subjects appear in first-appearance order of the input.
    """
    if not spells:
        raise ValidationError("no spell records")
    by_subject: dict[str, list[SpellRecord]] = {}
    for sp in spells:
        by_subject.setdefault(sp.subject_id, []).append(sp)

    sequences = []
    total_duration: int | None = None
    for subject_id, subject_spells in by_subject.items():
        subject_spells = sorted(subject_spells, key=lambda sp: sp.start)
        states: list[int] = []
        expected_start = 1
        for sp in subject_spells:
            if sp.start > expected_start:
                raise ValidationError(
                    f"subject {subject_id!r}: gap at time {expected_start} "
                    f"(next spell starts at {sp.start})"
                )
            if sp.start < expected_start:
                raise ValidationError(
                    f"subject {subject_id!r}: overlapping spell at time {sp.start}"
                )
            states.extend([alphabet.index(sp.state)] * sp.duration)
            expected_start += sp.duration
        if total_duration is None:
            total_duration = len(states)
        elif len(states) != total_duration:
            raise ValidationError(
                f"subject {subject_id!r} covers {len(states)} time units, "
                f"expected {total_duration} (all subjects must end at the same time)"
            )
        sequences.append(StateSequence(subject_id=subject_id, states=tuple(states)))
    return SequenceSet(
        alphabet=alphabet,
        sequences=tuple(sequences),
        granularity_label=granularity_label,
    )


def wide_to_spells(seq_set: SequenceSet) -> list[SpellRecord]:
    """Collapse each sequence into its maximal runs. Inverse of
    :func:`spells_to_wide` on valid inputs."""
    out: list[SpellRecord] = []
    states = seq_set.alphabet.states
    for seq in seq_set.sequences:
        start = 0
        for pos in range(1, len(seq.states) + 1):
            if pos == len(seq.states) or seq.states[pos] != seq.states[start]:
                out.append(
                    SpellRecord(
                        subject_id=seq.subject_id,
                        state=states[seq.states[start]],
                        start=start + 1,
                        duration=pos - start,
                    )
                )
                start = pos
    return out


def spell_durations(states: Sequence[int]) -> list[tuple[int, int]]:
    """Return the (state, duration) runs of a raw index sequence."""
    runs: list[tuple[int, int]] = []
    start = 0
    for pos in range(1, len(states) + 1):
        if pos == len(states) or states[pos] != states[start]:
            runs.append((states[start], pos - start))
            start = pos
    return runs


# ---------------------------------------------------------------------------
# File I/O


def read_wide_csv(
    path,
    id_column: str = "id",
    alphabet: Alphabet | None = None,
    granularity_label: str = "week",
) -> SequenceSet:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return parse_wide(
            fh, id_column=id_column, alphabet=alphabet, granularity_label=granularity_label
        )


def write_wide_csv(seq_set: SequenceSet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id"] + [f"t{j + 1}" for j in range(seq_set.length)])
        states = seq_set.alphabet.states
        for seq in seq_set.sequences:
            writer.writerow([seq.subject_id] + [states[s] for s in seq.states])


def read_spell_csv(path) -> list[SpellRecord]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["id", "state", "start", "duration"]:
        raise ValidationError('spell CSV must have header "id,state,start,duration"')
    records = []
    for r, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 4:
            raise ValidationError(f"spell CSV row {r}: expected 4 cells, got {len(row)}")
        subject_id, state, start, duration = row
        try:
            records.append(
                SpellRecord(
                    subject_id=subject_id,
                    state=state,
                    start=int(start),
                    duration=int(duration),
                )
            )
        except ValueError:
            raise ValidationError(
                f"spell CSV row {r}: start/duration must be integers"
            ) from None
    return records


def write_spell_csv(spells: Sequence[SpellRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "state", "start", "duration"])
        for sp in spells:
            writer.writerow([sp.subject_id, sp.state, sp.start, sp.duration])


def read_alphabet_json(path) -> Alphabet:
    with open(path, "r", encoding="utf-8") as fh:
        return Alphabet.from_json(fh.read())


def write_alphabet_json(alphabet: Alphabet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(alphabet.to_json())
