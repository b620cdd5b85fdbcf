"""Seeded synthetic cohorts: Markov state sequences plus outcome times.

Randomness comes from the Philox 4x64 counter-based generator, which has
a fixed published specification and produces the same stream on every
platform. Streams are derived per subject so generation could run in any
order or in parallel and still give identical output:

    key word 0 = seed (taken modulo 2^64)
    key word 1 = (stream id << 48) | subject index

with stream id 0 for sequence draws and 1 for outcome draws. Sequences
are drawn by inverse transform: one uniform per position, mapped through
the cumulative initial distribution (first position) or the cumulative
transition row of the previous state.

The built-in preset models weekly treatment-variety dynamics over the
four states 0/3 (not treated) through 3/3 (covered by all three
treatment kinds), with a strongly sticky untreated state; its one
slightly off-stochastic row is renormalized to sum to 1. The preset's
initial distribution is uniform unless week-1 shares are supplied.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .clustering import ClusterAssignment
from .core import Alphabet, SequenceSet, StateSequence
from .errors import ValidationError

_SEQ_STREAM = 0
_OUTCOME_STREAM = 1
_U64 = np.uint64(2**64 - 1)


def _subject_rng(seed: int, stream: int, subject_index: int) -> np.random.Generator:
    if subject_index >= 2**48:
        raise ValidationError("subject index exceeds the 48-bit stream space")
    key = np.array([seed & (2**64 - 1), (stream << 48) | subject_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class GeneratorSpec:
    """Everything needed to draw one cohort deterministically.

    ``subject_offset`` shifts both the stream indices and the id
    numbering, so several specs with the same seed and disjoint offset
    ranges draw non-overlapping streams (used for mixture cohorts).
    ``id_width`` fixes the zero-padding of subject ids; 0 means derive it
    from the largest index this spec will produce.
    """

    alphabet: Alphabet
    initial: np.ndarray  # (a,) probabilities
    transition: np.ndarray  # (a, a) row-stochastic
    n_subjects: int
    n_positions: int
    seed: int
    granularity_label: str = "week"
    id_prefix: str = "p"
    subject_offset: int = 0
    id_width: int = 0

    def __post_init__(self) -> None:
        a = self.alphabet.size
        initial = np.asarray(self.initial, dtype=np.float64)
        transition = np.asarray(self.transition, dtype=np.float64)
        if initial.shape != (a,):
            raise ValidationError(f"initial distribution must have length {a}")
        if transition.shape != (a, a):
            raise ValidationError(f"transition matrix must be {a}x{a}")
        if np.any(initial < 0) or np.any(transition < 0):
            raise ValidationError("probabilities must be non-negative")
        if abs(initial.sum() - 1.0) > 1e-9:
            raise ValidationError("initial distribution must sum to 1")
        row_err = np.abs(transition.sum(axis=1) - 1.0)
        if np.any(row_err > 1e-9):
            bad = int(np.argmax(row_err))
            raise ValidationError(
                f"transition row {bad} sums to {transition[bad].sum():.12f}, expected 1"
            )
        if self.n_subjects < 1 or self.n_positions < 1:
            raise ValidationError("need at least one subject and one position")
        if self.subject_offset < 0 or self.id_width < 0:
            raise ValidationError("subject_offset and id_width must be non-negative")
        initial.setflags(write=False)
        transition.setflags(write=False)
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "transition", transition)


# Weekly treatment-variety preset: states count how many of the three
# treatment kinds cover the week. The 1/3 row is renormalized (its
# two-decimal entries sum to 1.01).
TREATMENT_STATES = ("0/3", "1/3", "2/3", "3/3")
TREATMENT_LABELS = {
    "0/3": "Not treated",
    "1/3": "Low variety of treatments",
    "2/3": "Medium variety of treatments",
    "3/3": "High variety of treatments",
}
_TREATMENT_ROWS = np.array(
    [
        [0.95, 0.04, 0.01, 0.00],
        [0.09, 0.81, 0.10, 0.01],
        [0.01, 0.12, 0.83, 0.04],
        [0.00, 0.01, 0.12, 0.87],
    ]
)
TREATMENT_TRANSITION = _TREATMENT_ROWS / _TREATMENT_ROWS.sum(axis=1, keepdims=True)


def treatment_alphabet() -> Alphabet:
    return Alphabet(states=TREATMENT_STATES, labels=dict(TREATMENT_LABELS))


def treatment_pathway_spec(
    n_subjects: int = 2329,
    n_positions: int = 52,
    seed: int = 0,
    initial: Sequence[float] | None = None,
) -> GeneratorSpec:
    alphabet = treatment_alphabet()
    if initial is None:
        initial = np.full(alphabet.size, 1.0 / alphabet.size)
    return GeneratorSpec(
        alphabet=alphabet,
        initial=np.asarray(initial, dtype=np.float64),
        transition=TREATMENT_TRANSITION.copy(),
        n_subjects=n_subjects,
        n_positions=n_positions,
        seed=seed,
    )


def generate_sequences(spec: GeneratorSpec) -> SequenceSet:
    """Independent first-order Markov sequences, one per subject."""
    a = spec.alphabet.size
    n = spec.n_subjects
    t_len = spec.n_positions
    uniforms = np.empty((n, t_len), dtype=np.float64)
    for i in range(n):
        uniforms[i] = _subject_rng(spec.seed, _SEQ_STREAM, spec.subject_offset + i).random(
            t_len
        )

    cum_initial = np.cumsum(spec.initial)
    cum_rows = np.cumsum(spec.transition, axis=1)
    codes = np.empty((n, t_len), dtype=np.int64)
    state = np.minimum(
        np.searchsorted(cum_initial, uniforms[:, 0], side="right"), a - 1
    )
    codes[:, 0] = state
    for t in range(1, t_len):
        # row-wise inverse cdf: count cumulative entries <= u
        state = np.minimum((cum_rows[state] <= uniforms[:, t, None]).sum(axis=1), a - 1)
        codes[:, t] = state

    width = spec.id_width or len(str(spec.subject_offset + n))
    sequences = tuple(
        StateSequence(
            subject_id=f"{spec.id_prefix}{spec.subject_offset + i + 1:0{width}d}",
            states=tuple(int(s) for s in codes[i]),
        )
        for i in range(n)
    )
    return SequenceSet(
        alphabet=spec.alphabet,
        sequences=sequences,
        granularity_label=spec.granularity_label,
    )


def generate_mixture(specs: Sequence[GeneratorSpec]) -> tuple[SequenceSet, np.ndarray]:
    """Concatenated cohort from several specs plus 1-based group labels.

    All specs must share one alphabet and sequence length; offsets must
    make subject ids unique (the mixture builders arrange this).
    """
    if not specs:
        raise ValidationError("no generator specs")
    sets = [generate_sequences(spec) for spec in specs]
    first = sets[0]
    sequences: list[StateSequence] = []
    labels: list[int] = []
    for g, part in enumerate(sets, start=1):
        if part.alphabet.states != first.alphabet.states:
            raise ValidationError("mixture specs must share one alphabet")
        if part.length != first.length:
            raise ValidationError("mixture specs must share one sequence length")
        sequences.extend(part.sequences)
        labels.extend([g] * part.n)
    ids = [s.subject_id for s in sequences]
    if len(set(ids)) != len(ids):
        raise ValidationError("mixture specs produced duplicate subject ids")
    mixed = SequenceSet(
        alphabet=first.alphabet,
        sequences=tuple(sequences),
        granularity_label=first.granularity_label,
    )
    return mixed, np.array(labels, dtype=np.int64)


# Three-group mixture with distinguishable weekly dynamics: a group that
# stays mostly untreated, one living around low/medium variety, and one
# holding medium/high variety. Useful for end-to-end demos where the
# clustering should find real structure.
_MIXTURE_INITIALS = np.array(
    [
        [0.85, 0.10, 0.04, 0.01],
        [0.10, 0.55, 0.30, 0.05],
        [0.05, 0.15, 0.45, 0.35],
    ]
)
_MIXTURE_TRANSITIONS = np.array(
    [
        [
            [0.960, 0.030, 0.008, 0.002],
            [0.250, 0.700, 0.040, 0.010],
            [0.050, 0.250, 0.650, 0.050],
            [0.020, 0.080, 0.200, 0.700],
        ],
        [
            [0.700, 0.250, 0.040, 0.010],
            [0.040, 0.820, 0.120, 0.020],
            [0.020, 0.140, 0.800, 0.040],
            [0.010, 0.050, 0.240, 0.700],
        ],
        [
            [0.550, 0.250, 0.150, 0.050],
            [0.020, 0.600, 0.300, 0.080],
            [0.010, 0.040, 0.800, 0.150],
            [0.005, 0.015, 0.100, 0.880],
        ],
    ]
)


def treatment_mixture_specs(
    n_subjects: int,
    n_positions: int = 52,
    seed: int = 0,
    shares: Sequence[float] = (0.45, 0.30, 0.25),
) -> list[GeneratorSpec]:
    shares = np.asarray(shares, dtype=np.float64)
    if shares.shape != (3,) or np.any(shares <= 0) or abs(shares.sum() - 1.0) > 1e-9:
        raise ValidationError("shares must be 3 positive numbers summing to 1")
    sizes = np.floor(shares * n_subjects).astype(int)
    sizes[0] += n_subjects - sizes.sum()  # remainder goes to the first group
    alphabet = treatment_alphabet()
    width = len(str(n_subjects))
    specs = []
    offset = 0
    for g in range(3):
        specs.append(
            GeneratorSpec(
                alphabet=alphabet,
                initial=_MIXTURE_INITIALS[g].copy(),
                transition=_MIXTURE_TRANSITIONS[g].copy(),
                n_subjects=int(sizes[g]),
                n_positions=n_positions,
                seed=seed,
                subject_offset=offset,
                id_width=width,
            )
        )
        offset += int(sizes[g])
    return specs


def generate_outcomes(
    assignment: ClusterAssignment,
    subject_ids: Sequence[str],
    hr_per_cluster: Sequence[float],
    baseline_rate: float,
    censor_time: float,
    seed: int,
) -> dict[str, tuple[float, bool]]:
    """Exponential event times with cluster-multiplied hazard, censored
    administratively at ``censor_time``. Subject order is preserved."""
    if len(subject_ids) != assignment.n:
        raise ValidationError("subject id count does not match the assignment")
    hrs = np.asarray(hr_per_cluster, dtype=np.float64)
    if hrs.shape != (assignment.k,):
        raise ValidationError(
            f"need one hazard ratio per cluster ({assignment.k}), got {hrs.shape}"
        )
    if np.any(hrs <= 0):
        raise ValidationError("hazard ratios must be positive")
    if baseline_rate < 0:
        raise ValidationError("baseline rate must be non-negative")
    if censor_time <= 0:
        raise ValidationError("censor time must be positive")
    out: dict[str, tuple[float, bool]] = {}
    for i, sid in enumerate(subject_ids):
        u = float(_subject_rng(seed, _OUTCOME_STREAM, i).random())
        rate = baseline_rate * hrs[assignment.labels[i] - 1]
        if rate > 0:
            event_time = max(-np.log1p(-u) / rate, 1e-12)
        else:
            event_time = np.inf
        if event_time <= censor_time:
            out[sid] = (float(event_time), True)
        else:
            out[sid] = (float(censor_time), False)
    return out
