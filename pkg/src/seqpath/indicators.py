"""Per-sequence longitudinal indicators.

Two scalar summaries of how varied a single trajectory is:

* longitudinal entropy, the Shannon entropy (natural log) of the time
  shares the sequence spends in each state. Zero iff the sequence never
  leaves its first state, maximal at log(a) when all a states occupy
  equal shares.
* turbulence, log2(phi * (s2_max + 1) / (s2 + 1)), combining the number
  phi of distinct subsequences of the spell-collapsed sequence with the
  population variance s2 of the spell durations; s2_max = (m - 1) *
  (1 - mean_duration)^2 is the largest value that variance can take for
  m spells of the same total duration. Counting the empty subsequence in
  phi pins the turbulence of a constant sequence at exactly 1. Low
  duration variance means high complexity, so turbulence falls as s2
  grows, all else fixed.

phi is accumulated as a Python big integer and only converted to float
inside the log2, so long high-variety sequences cannot overflow.

Entropy and turbulence are the only complexity summaries provided; no
composite complexity index is defined here. The table also reports the
plain counting summaries (transitions, distinct states, time per state).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import SequenceSet, StateSequence, spell_durations
from .errors import ValidationError


@dataclass(frozen=True)
class IndicatorRow:
    subject_id: str
    entropy: float
    normalized_entropy: float
    turbulence: float
    n_transitions: int
    n_distinct_states: int
    time_in_state: tuple[int, ...]


def entropy(seq: StateSequence | Sequence[int], alphabet_size: int) -> float:
    """Shannon entropy (natural log) of the sequence's state shares."""
    states = seq.states if isinstance(seq, StateSequence) else tuple(seq)
    if not states:
        raise ValidationError("entropy of an empty sequence is undefined")
    if alphabet_size < 1:
        raise ValidationError("alphabet_size must be >= 1")
    counts = np.bincount(np.asarray(states, dtype=np.int64), minlength=alphabet_size)
    if counts.size > alphabet_size:
        raise ValidationError("sequence contains state indices beyond alphabet_size")
    shares = counts[counts > 0] / len(states)
    return float(-np.sum(shares * np.log(shares)))


def count_distinct_subsequences(dss: Sequence[int]) -> int:
    """Number of distinct subsequences of ``dss``, empty one included.

    ``dss`` should already be spell-collapsed (no equal adjacent states),
    though the count is well defined for any input. Last-occurrence
    dynamic programming, O(len * alphabet), exact big-integer result.
    """
    total = 1  # the empty subsequence
    last: dict[int, int] = {}  # state -> count before its previous occurrence
    for s in dss:
        added = total - last.get(s, 0)
        last[s] = total
        total += added
    return total


def turbulence(seq: StateSequence | Sequence[int]) -> float:
    """Trajectory complexity from subsequence variety and spell durations."""
    states = seq.states if isinstance(seq, StateSequence) else tuple(seq)
    if not states:
        raise ValidationError("turbulence of an empty sequence is undefined")
    runs = spell_durations(states)
    dss = [s for s, _ in runs]
    durations = np.array([d for _, d in runs], dtype=np.float64)
    m = len(runs)
    if m == 1:
        s2 = s2_max = 0.0
    else:
        mean = float(durations.mean())
        s2 = float(durations.var())  # population variance, divide by m
        s2_max = (m - 1) * (1.0 - mean) ** 2
    phi = count_distinct_subsequences(dss)
    return math.log2(phi) + math.log2((s2_max + 1.0) / (s2 + 1.0))


def indicator_table(seq_set: SequenceSet) -> list[IndicatorRow]:
    """One IndicatorRow per sequence, in input order."""
    a = seq_set.alphabet.size
    log_a = math.log(a) if a > 1 else 0.0
    rows = []
    for seq in seq_set.sequences:
        h = entropy(seq, a)
        runs = spell_durations(seq.states)
        counts = np.bincount(np.asarray(seq.states, dtype=np.int64), minlength=a)
        rows.append(
            IndicatorRow(
                subject_id=seq.subject_id,
                entropy=h,
                normalized_entropy=h / log_a if log_a > 0 else 0.0,
                turbulence=turbulence(seq),
                n_transitions=len(runs) - 1,
                n_distinct_states=int(np.count_nonzero(counts)),
                time_in_state=tuple(int(c) for c in counts),
            )
        )
    return rows


def write_indicator_csv(rows: Sequence[IndicatorRow], seq_set: SequenceSet, path) -> None:
    header = [
        "id",
        "entropy",
        "normalized_entropy",
        "turbulence",
        "n_transitions",
        "n_distinct_states",
    ] + [f"time_in_{s}" for s in seq_set.alphabet.states]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [
                    row.subject_id,
                    repr(row.entropy),
                    repr(row.normalized_entropy),
                    repr(row.turbulence),
                    row.n_transitions,
                    row.n_distinct_states,
                    *row.time_in_state,
                ]
            )


def read_indicator_csv(path) -> list[IndicatorRow]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValidationError("empty indicator CSV")
    header = rows[0]
    fixed = ["id", "entropy", "normalized_entropy", "turbulence", "n_transitions", "n_distinct_states"]
    if header[: len(fixed)] != fixed:
        raise ValidationError(f"unexpected indicator CSV header: {header}")
    out = []
    for row in rows[1:]:
        if not row:
            continue
        out.append(
            IndicatorRow(
                subject_id=row[0],
                entropy=float(row[1]),
                normalized_entropy=float(row[2]),
                turbulence=float(row[3]),
                n_transitions=int(row[4]),
                n_distinct_states=int(row[5]),
                time_in_state=tuple(int(c) for c in row[6:]),
            )
        )
    return out
