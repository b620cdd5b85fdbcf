"""Cohort-level summaries and cluster profiling.

The transition matrix pools adjacent-position moves over all subjects
and positions; its row-normalized probabilities are exactly the rates
behind the transition-rate substitution costs, so the two agree by
construction: cost(a, b) = 2 - probs[a][b] - probs[b][a].

The representativeness score is a neighborhood density: the share of
sequences lying within ``radius_fraction * max(D)`` of each sequence
(boundary included; with an all-zero matrix every score is 1). This
definition is an artifact choice, documented here rather than taken
from any published convention. The highest-scoring sequence is the
natural representative.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as _scipy_stats

from .clustering import ClusterAssignment
from .core import Alphabet, SequenceSet, StateSequence
from .dissimilarity import DissimilarityMatrix, _pooled_transition_counts
from .errors import ValidationError


@dataclass(frozen=True)
class TransitionMatrix:
    """Pooled adjacent-position transition counts and row probabilities.

    Rows of states never observed before the last position stay at zero
    and are listed in ``unobserved`` instead of being fabricated.
    """

    counts: np.ndarray  # (a, a) int64
    probs: np.ndarray  # (a, a) float64
    unobserved: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        probs = np.asarray(self.probs, dtype=np.float64)
        if counts.shape != probs.shape or counts.ndim != 2:
            raise ValidationError("counts and probs must be square and congruent")
        for i in range(probs.shape[0]):
            if i in self.unobserved:
                continue
            if abs(probs[i].sum() - 1.0) > 1e-9:
                raise ValidationError(f"transition row {i} does not sum to 1")
        counts.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "probs", probs)


def transition_matrix(seq_set: SequenceSet) -> TransitionMatrix:
    if seq_set.length < 2:
        raise ValidationError("transition matrix needs sequences of length >= 2")
    counts, origins = _pooled_transition_counts(seq_set)
    a = seq_set.alphabet.size
    probs = np.zeros((a, a), dtype=np.float64)
    observed = origins > 0
    probs[observed] = counts[observed] / origins[observed, None]
    unobserved = tuple(int(i) for i in np.flatnonzero(~observed))
    return TransitionMatrix(counts=counts, probs=probs, unobserved=unobserved)


@dataclass(frozen=True)
class StateDistribution:
    """Per-position state proportions; each row sums to 1."""

    per_position: np.ndarray  # (T, a) float64

    def __post_init__(self) -> None:
        p = np.asarray(self.per_position, dtype=np.float64)
        if p.ndim != 2:
            raise ValidationError("per_position must be (T, a)")
        if np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-9):
            raise ValidationError("each position's proportions must sum to 1")
        p.setflags(write=False)
        object.__setattr__(self, "per_position", p)


def state_distribution(seq_set: SequenceSet) -> StateDistribution:
    a = seq_set.alphabet.size
    codes = seq_set.codes
    per_position = np.zeros((seq_set.length, a), dtype=np.float64)
    for t in range(seq_set.length):
        per_position[t] = np.bincount(codes[:, t], minlength=a) / seq_set.n
    return StateDistribution(per_position=per_position)


def modal_sequence(seq_set: SequenceSet) -> StateSequence:
    """Position-wise most frequent state; ties go to the lower alphabet
    index (argmax keeps the first maximum)."""
    dist = state_distribution(seq_set).per_position
    return StateSequence(subject_id="modal", states=tuple(int(s) for s in dist.argmax(axis=1)))


@dataclass(frozen=True)
class FrequencyTable:
    """Distinct sequences sorted by count (descending), ties by first
    appearance. ``shares`` sum to 1 over all distinct sequences; only the
    top requested entries are kept."""

    entries: tuple[tuple[tuple[int, ...], int, float], ...]  # (states, count, share)
    n_distinct: int
    n_total: int


def frequency_table(seq_set: SequenceSet, top: int = 10) -> FrequencyTable:
    if top < 1:
        raise ValidationError("top must be >= 1")
    counts: dict[tuple[int, ...], int] = {}
    for seq in seq_set.sequences:
        counts[seq.states] = counts.get(seq.states, 0) + 1
    ordered = sorted(counts.items(), key=lambda kv: -kv[1])  # dict keeps first-appearance order
    entries = tuple(
        (states, count, count / seq_set.n) for states, count in ordered[:top]
    )
    return FrequencyTable(entries=entries, n_distinct=len(counts), n_total=seq_set.n)


def representativeness(
    seq_set: SequenceSet, matrix: DissimilarityMatrix, radius_fraction: float = 0.1
) -> np.ndarray:
    """Neighborhood-density scores in input order (module docstring has
    the definition)."""
    if not 0 < radius_fraction <= 1:
        raise ValidationError("radius_fraction must lie in (0, 1]")
    if matrix.n != seq_set.n:
        raise ValidationError("matrix size does not match the sequence set")
    square = matrix.toarray()
    radius = radius_fraction * square.max()
    return (square <= radius).sum(axis=1) / seq_set.n


# ---------------------------------------------------------------------------
# Cluster profiling


@dataclass(frozen=True)
class CategoricalProfile:
    name: str
    levels: tuple[str, ...]
    counts: np.ndarray  # (levels, k) int64
    percents: np.ndarray  # (levels, k) float64, column-wise percentages
    chi2: float
    df: int
    p_value: float
    min_expected: float  # below 5 means the chi-squared approximation is shaky


@dataclass(frozen=True)
class NumericProfile:
    name: str
    means: np.ndarray  # (k,)
    sds: np.ndarray  # (k,)


@dataclass(frozen=True)
class ClusterProfileReport:
    k: int
    cluster_sizes: np.ndarray
    categoricals: tuple[CategoricalProfile, ...]
    numerics: tuple[NumericProfile, ...]

    def to_text(self) -> str:
        lines = []
        header = ["variable"] + [
            f"cluster {c + 1} (n={int(self.cluster_sizes[c])})" for c in range(self.k)
        ] + ["p-value"]
        lines.append("  ".join(header))
        for cat in self.categoricals:
            p_txt = "<0.001" if cat.p_value < 0.001 else f"{cat.p_value:.3f}"
            note = "" if cat.min_expected >= 5 else " (expected count < 5)"
            lines.append(f"{cat.name}{note}")
            for li, level in enumerate(cat.levels):
                cells = [
                    f"{int(cat.counts[li, c])} ({cat.percents[li, c]:.1f}%)"
                    for c in range(self.k)
                ]
                suffix = p_txt if li == 0 else ""
                lines.append("  " + "  ".join([level] + cells + [suffix]).rstrip())
        for num in self.numerics:
            cells = [f"{num.means[c]:.2f} ({num.sds[c]:.2f})" for c in range(self.k)]
            lines.append("  ".join([f"{num.name}: mean (SD)"] + cells))
        return "\n".join(lines) + "\n"

    def to_csv_rows(self) -> list[list[str]]:
        rows: list[list[str]] = [
            ["variable", "level"]
            + [f"cluster_{c + 1}" for c in range(self.k)]
            + ["statistic", "p_value", "min_expected"]
        ]
        for cat in self.categoricals:
            for li, level in enumerate(cat.levels):
                rows.append(
                    [cat.name, level]
                    + [
                        f"{int(cat.counts[li, c])} ({cat.percents[li, c]:.1f}%)"
                        for c in range(self.k)
                    ]
                    + (
                        [repr(cat.chi2), repr(cat.p_value), repr(cat.min_expected)]
                        if li == 0
                        else ["", "", ""]
                    )
                )
        for num in self.numerics:
            rows.append(
                [num.name, "mean (SD)"]
                + [f"{float(num.means[c])!r} ({float(num.sds[c])!r})" for c in range(self.k)]
                + ["", "", ""]
            )
        return rows


def chi_squared_test(table: np.ndarray) -> tuple[float, int, float, float]:
    """Pearson chi-squared for an r x c count table, no continuity
    correction. Zero-margin rows and columns are dropped first. Returns
    (statistic, df, p, min expected count)."""
    table = np.asarray(table, dtype=np.float64)
    table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
    r, c = table.shape
    if r < 2 or c < 2:
        return 0.0, 0, 1.0, float("nan")
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / table.sum()
    stat = float(((table - expected) ** 2 / expected).sum())
    df = (r - 1) * (c - 1)
    p = float(_scipy_stats.chi2.sf(stat, df))
    return stat, df, p, float(expected.min())


CovariateTable = Mapping[str, Mapping[str, str]]
"""Covariates as column name -> {subject id -> raw cell value}."""


def cluster_profile(
    seq_set: SequenceSet,
    assignment: ClusterAssignment,
    covariates: CovariateTable,
) -> ClusterProfileReport:
    """Per-cluster covariate summary in the style of a baseline table.

    Columns whose every value parses as a float are treated as numeric
    (mean and SD per cluster); all others as categorical (counts, column
    percentages, and a chi-squared test across clusters).
    """
    if assignment.n != seq_set.n:
        raise ValidationError("assignment size does not match the sequence set")
    ids = seq_set.subject_ids
    labels = assignment.labels
    k = assignment.k
    categoricals: list[CategoricalProfile] = []
    numerics: list[NumericProfile] = []
    for name, column in covariates.items():
        missing = [sid for sid in ids if sid not in column]
        if missing:
            raise ValidationError(
                f"covariate {name!r} is missing {len(missing)} subject(s), "
                f"first: {missing[0]!r}"
            )
        raw = [column[sid] for sid in ids]
        values = _try_floats(raw)
        if values is not None:
            means = np.empty(k)
            sds = np.empty(k)
            for c in range(k):
                sel = values[labels == c + 1]
                means[c] = sel.mean()
                sds[c] = sel.std(ddof=1) if sel.size > 1 else 0.0
            numerics.append(NumericProfile(name=name, means=means, sds=sds))
        else:
            levels = tuple(dict.fromkeys(raw))  # first-appearance order
            level_index = {lv: i for i, lv in enumerate(levels)}
            counts = np.zeros((len(levels), k), dtype=np.int64)
            for val, lab in zip(raw, labels):
                counts[level_index[val], lab - 1] += 1
            percents = 100.0 * counts / counts.sum(axis=0, keepdims=True)
            chi2, df, p, min_exp = chi_squared_test(counts)
            categoricals.append(
                CategoricalProfile(
                    name=name,
                    levels=levels,
                    counts=counts,
                    percents=percents,
                    chi2=chi2,
                    df=df,
                    p_value=p,
                    min_expected=min_exp,
                )
            )
    return ClusterProfileReport(
        k=k,
        cluster_sizes=assignment.sizes,
        categoricals=tuple(categoricals),
        numerics=tuple(numerics),
    )


def _try_floats(raw: Sequence[str]) -> np.ndarray | None:
    try:
        return np.array([float(v) for v in raw], dtype=np.float64)
    except ValueError:
        return None


def read_covariates_csv(path) -> dict[str, dict[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["id"]:
        raise ValidationError('covariates CSV must start with an "id" column')
    names = rows[0][1:]
    table: dict[str, dict[str, str]] = {name: {} for name in names}
    for r, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(names) + 1:
            raise ValidationError(f"covariates CSV row {r} has {len(row)} cells")
        for name, value in zip(names, row[1:]):
            table[name][row[0]] = value
    return table


# ---------------------------------------------------------------------------
# Bundles for the CLI and plots


def describe_bundle(seq_set: SequenceSet, top: int = 10) -> dict:
    """JSON-ready cohort summary: transition matrix, per-position state
    distribution, top frequencies, and the modal sequence."""
    tm = transition_matrix(seq_set)
    dist = state_distribution(seq_set)
    freq = frequency_table(seq_set, top=top)
    modal = modal_sequence(seq_set)
    states = list(seq_set.alphabet.states)
    return {
        "n": seq_set.n,
        "length": seq_set.length,
        "granularity": seq_set.granularity_label,
        "states": states,
        "transition_counts": tm.counts.tolist(),
        "transition_probs": [[round(v, 12) for v in row] for row in tm.probs],
        "unobserved_states": [states[i] for i in tm.unobserved],
        "state_distribution": [[round(v, 12) for v in row] for row in dist.per_position],
        "modal_sequence": [states[s] for s in modal.states],
        "frequency_table": [
            {
                "sequence": [states[s] for s in entry[0]],
                "count": entry[1],
                "share": round(entry[2], 12),
            }
            for entry in freq.entries
        ],
        "n_distinct_sequences": freq.n_distinct,
    }


def write_describe_bundle(bundle: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(bundle, fh, indent=2, sort_keys=False)
        fh.write("\n")


def write_transition_csv(tm: TransitionMatrix, alphabet: Alphabet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["from\\to"] + list(alphabet.states))
        for i, s in enumerate(alphabet.states):
            writer.writerow([s] + [repr(float(v)) for v in tm.probs[i]])


def write_distribution_csv(dist: StateDistribution, alphabet: Alphabet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["position"] + list(alphabet.states))
        for t, row in enumerate(dist.per_position, start=1):
            writer.writerow([t] + [repr(float(v)) for v in row])


def write_frequency_csv(freq: FrequencyTable, alphabet: Alphabet, path) -> None:
    states = alphabet.states
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sequence", "count", "share"])
        for entry_states, count, share in freq.entries:
            writer.writerow(["-".join(states[s] for s in entry_states), count, repr(share)])
