"""Pairwise dissimilarity kernels and full-matrix construction.

Four metrics over aligned state sequences:

* ``om``: minimum total edit cost (insert, delete, substitute) turning
  one sequence into the other, with a substitution cost matrix and an
  indel cost. With indel 1 and constant substitution cost 2 this equals
  the LCS distance on every pair.
* ``lcs``: |x| + |y| - 2 * (longest common subsequence length). Rewards
  shared patterns even when they are shifted in time.
* ``hamming``: position-wise substitution costs, no shifts, original
  timescale kept. Unit costs by default.
* ``dhd``: dynamic Hamming, position-wise costs that vary with time.

Substitution costs can be data driven: the cost of swapping states a and
b is 2 minus the observed transition rates between them, pooled over all
adjacent position pairs, so frequent transitions are cheap to substitute.
The time-varying variant conditions on position: the slice cost at t is
4 - p(x_t=a | x_{t-1}=b) - p(x_t=b | x_{t-1}=a)
  - p(x_{t+1}=a | x_t=b) - p(x_{t+1}=b | x_t=a)
with position-specific conditional frequencies; the first and last
positions double their single available half. This slice formula is an
artifact convention, validated against simulation, not a published one.

User-chosen costs can break the triangle inequality; ``triangle_audit``
samples triples from a finished matrix and reports violations instead of
hiding them.

Full matrices are stored as a packed lower triangle of float64 (pair
(i, j), i > j, at offset i*(i-1)//2 + j). Construction distributes pairs
across threads with one write per pair, so the result is bit-identical
for any thread count.
"""
from __future__ import annotations

import csv
import struct
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .core import SequenceSet, StateSequence
from .errors import ValidationError

METRICS = ("om", "hamming", "dhd", "lcs")

SQDM_MAGIC = b"SQDM"
SQDM_VERSION = 1


def _as_codes(x: StateSequence | Sequence[int]) -> np.ndarray:
    states = x.states if isinstance(x, StateSequence) else tuple(x)
    if not states:
        raise ValidationError("empty sequence")
    return np.asarray(states, dtype=np.uint8)


@dataclass(frozen=True)
class SubstitutionCostMatrix:
    """Symmetric state-swap costs plus the insertion/deletion cost."""

    costs: np.ndarray
    indel: float = 1.0
    source: str = "user"  # constant | transition_rate | user

    def __post_init__(self) -> None:
        costs = np.asarray(self.costs, dtype=np.float64)
        if costs.ndim != 2 or costs.shape[0] != costs.shape[1]:
            raise ValidationError("cost matrix must be square")
        if not np.all(np.isfinite(costs)):
            raise ValidationError("cost matrix contains non-finite entries")
        if np.any(costs < 0):
            raise ValidationError("costs must be non-negative")
        if np.any(np.diag(costs) != 0):
            raise ValidationError("cost matrix diagonal must be zero")
        if not np.array_equal(costs, costs.T):
            raise ValidationError("cost matrix must be symmetric")
        if self.indel <= 0:
            raise ValidationError("indel cost must be positive")
        if self.source == "transition_rate" and np.any(costs > 2.0 + 1e-12):
            raise ValidationError("transition-rate costs must lie in [0, 2]")
        costs.setflags(write=False)
        object.__setattr__(self, "costs", costs)

    @property
    def size(self) -> int:
        return self.costs.shape[0]


def constant_costs(n_states: int, substitution: float = 2.0, indel: float = 1.0) -> SubstitutionCostMatrix:
    costs = np.full((n_states, n_states), float(substitution))
    np.fill_diagonal(costs, 0.0)
    return SubstitutionCostMatrix(costs=costs, indel=indel, source="constant")


def _pooled_transition_counts(seq_set: SequenceSet) -> tuple[np.ndarray, np.ndarray]:
    """Adjacent-position transition counts pooled over subjects and
    positions, plus each state's occurrence count at positions 1..T-1."""
    a = seq_set.alphabet.size
    codes = seq_set.codes
    src = codes[:, :-1].ravel().astype(np.int64)
    dst = codes[:, 1:].ravel().astype(np.int64)
    counts = np.zeros((a, a), dtype=np.int64)
    np.add.at(counts, (src, dst), 1)
    origins = np.bincount(src, minlength=a).astype(np.int64)
    return counts, origins


def transition_rate_costs(seq_set: SequenceSet, indel: float = 1.0) -> SubstitutionCostMatrix:
    """Substitution costs 2 - p(a->b) - p(b->a) from pooled transition rates.

    States never observed before the last position have no outgoing
    transitions; their rates are taken as 0 (cost 2 against every other
    state) and a warning is emitted.
    """
    if seq_set.length < 2:
        raise ValidationError("transition-rate costs need sequences of length >= 2")
    counts, origins = _pooled_transition_counts(seq_set)
    a = seq_set.alphabet.size
    rates = np.zeros((a, a), dtype=np.float64)
    observed = origins > 0
    rates[observed] = counts[observed] / origins[observed, None]
    if not np.all(observed):
        missing = [seq_set.alphabet.states[i] for i in np.flatnonzero(~observed)]
        warnings.warn(
            f"states never observed before the last position: {missing}; "
            "their outgoing transition rates are treated as 0",
            stacklevel=2,
        )
    costs = 2.0 - (rates + rates.T)  # symmetrize first, bitwise
    np.fill_diagonal(costs, 0.0)
    costs = np.clip(costs, 0.0, 2.0)
    return SubstitutionCostMatrix(costs=costs, indel=indel, source="transition_rate")


@dataclass(frozen=True)
class TimeVaryingCosts:
    """One symmetric zero-diagonal cost slice per time position."""

    costs_by_time: np.ndarray  # (T, a, a)

    def __post_init__(self) -> None:
        c = np.asarray(self.costs_by_time, dtype=np.float64)
        if c.ndim != 3 or c.shape[1] != c.shape[2]:
            raise ValidationError("time-varying costs must have shape (T, a, a)")
        if not np.all(np.isfinite(c)):
            raise ValidationError("time-varying costs contain non-finite entries")
        for t in range(c.shape[0]):
            if np.any(np.diag(c[t]) != 0):
                raise ValidationError(f"cost slice {t + 1} has a non-zero diagonal")
            if not np.array_equal(c[t], c[t].T):
                raise ValidationError(f"cost slice {t + 1} is not symmetric")
        c.setflags(write=False)
        object.__setattr__(self, "costs_by_time", c)

    @property
    def length(self) -> int:
        return self.costs_by_time.shape[0]

    @property
    def size(self) -> int:
        return self.costs_by_time.shape[1]


def dhd_costs(seq_set: SequenceSet) -> TimeVaryingCosts:
    """Position-specific substitution costs from the conditional
    transition frequencies into and out of each position (module
    docstring has the formula)."""
    if seq_set.length < 3:
        raise ValidationError("time-varying costs need sequences of length >= 3")
    a = seq_set.alphabet.size
    codes = seq_set.codes.astype(np.int64)
    t_len = seq_set.length
    # cond[t, b, s]: frequency of state s at position t+1 among subjects
    # in state b at position t
    cond = np.zeros((t_len - 1, a, a), dtype=np.float64)
    for t in range(t_len - 1):
        counts = np.zeros((a, a), dtype=np.int64)
        np.add.at(counts, (codes[:, t], codes[:, t + 1]), 1)
        totals = counts.sum(axis=1)
        nz = totals > 0
        cond[t, nz] = counts[nz] / totals[nz, None]

    # symmetrize before subtracting so slices are bitwise symmetric
    sym = cond + cond.transpose(0, 2, 1)
    slices = np.zeros((t_len, a, a), dtype=np.float64)
    for t in range(t_len):
        if t == 0:
            slice_t = 2.0 * (2.0 - sym[0])
        elif t == t_len - 1:
            slice_t = 2.0 * (2.0 - sym[t_len - 2])
        else:
            slice_t = (2.0 - sym[t - 1]) + (2.0 - sym[t])
        np.fill_diagonal(slice_t, 0.0)
        slices[t] = slice_t
    return TimeVaryingCosts(costs_by_time=slices)


# ---------------------------------------------------------------------------
# Single-pair kernels


def om_distance(
    x: StateSequence | Sequence[int],
    y: StateSequence | Sequence[int],
    costs: SubstitutionCostMatrix,
) -> float:
    """Minimum edit cost (insert/delete at ``costs.indel``, substitute at
    ``costs.costs``) transforming x into y."""
    cx, cy = _as_codes(x), _as_codes(y)
    if int(max(cx.max(), cy.max())) >= costs.size:
        raise ValidationError("sequence uses a state outside the cost matrix")
    return float(_kernels.om_cost(cx, cy, costs.costs, float(costs.indel)))


def lcs_length(x: StateSequence | Sequence[int], y: StateSequence | Sequence[int]) -> int:
    return int(_kernels.lcs_len_dp(_as_codes(x), _as_codes(y)))


def lcs_distance(x: StateSequence | Sequence[int], y: StateSequence | Sequence[int]) -> float:
    cx, cy = _as_codes(x), _as_codes(y)
    return float(len(cx) + len(cy) - 2 * int(_kernels.lcs_len_dp(cx, cy)))


def hamming_distance(
    x: StateSequence | Sequence[int],
    y: StateSequence | Sequence[int],
    costs: SubstitutionCostMatrix | None = None,
) -> float:
    cx, cy = _as_codes(x), _as_codes(y)
    if len(cx) != len(cy):
        raise ValidationError(
            f"hamming distance needs equal lengths, got {len(cx)} and {len(cy)}"
        )
    if costs is None:
        return float(np.count_nonzero(cx != cy))
    if int(max(cx.max(), cy.max())) >= costs.size:
        raise ValidationError("sequence uses a state outside the cost matrix")
    return float(costs.costs[cx.astype(np.int64), cy.astype(np.int64)].sum())


def dhd_distance(
    x: StateSequence | Sequence[int],
    y: StateSequence | Sequence[int],
    costs: TimeVaryingCosts,
) -> float:
    cx, cy = _as_codes(x), _as_codes(y)
    if len(cx) != len(cy):
        raise ValidationError(
            f"dynamic hamming distance needs equal lengths, got {len(cx)} and {len(cy)}"
        )
    if len(cx) != costs.length:
        raise ValidationError(
            f"sequences have {len(cx)} positions but costs cover {costs.length}"
        )
    idx = np.arange(len(cx))
    return float(costs.costs_by_time[idx, cx.astype(np.int64), cy.astype(np.int64)].sum())


# ---------------------------------------------------------------------------
# Full matrix


@dataclass(frozen=True)
class DissimilarityMatrix:
    """Symmetric pairwise distances, stored as a packed lower triangle."""

    n: int
    values: np.ndarray  # shape (n*(n-1)//2,), float64
    metric_tag: str = ""

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        expected = self.n * (self.n - 1) // 2
        if values.shape != (expected,):
            raise ValidationError(
                f"packed triangle for n={self.n} needs {expected} values, got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValidationError("dissimilarity matrix contains non-finite entries")
        if expected and values.min() < 0:
            raise ValidationError("dissimilarities must be non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def get(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        if i < j:
            i, j = j, i
        return float(self.values[i * (i - 1) // 2 + j])

    def toarray(self) -> np.ndarray:
        full = np.zeros((self.n, self.n), dtype=np.float64)
        rows, cols = np.tril_indices(self.n, k=-1)  # row-major, matches packing
        full[rows, cols] = self.values
        full += full.T
        return full

    @classmethod
    def from_square(cls, square: np.ndarray, metric_tag: str = "") -> "DissimilarityMatrix":
        square = np.asarray(square, dtype=np.float64)
        if square.ndim != 2 or square.shape[0] != square.shape[1]:
            raise ValidationError("expected a square matrix")
        if np.any(np.diag(square) != 0):
            raise ValidationError("diagonal must be zero")
        if not np.array_equal(square, square.T):
            raise ValidationError("matrix must be symmetric")
        n = square.shape[0]
        rows, cols = np.tril_indices(n, k=-1)
        return cls(n=n, values=square[rows, cols].copy(), metric_tag=metric_tag)


def _resolve_threads(threads: int | None) -> int:
    import numba

    available = numba.config.NUMBA_DEFAULT_NUM_THREADS
    if threads is None:
        return available
    if threads < 1:
        raise ValidationError("threads must be >= 1")
    return min(threads, available)


def pairwise_matrix(
    seq_set: SequenceSet,
    metric: str = "lcs",
    costs: SubstitutionCostMatrix | TimeVaryingCosts | None = None,
    indel: float | None = None,
    threads: int | None = None,
) -> DissimilarityMatrix:
    """All n(n-1)/2 pairwise distances for one metric.

    Defaults per metric: ``om`` uses constant substitution cost 2 and
    indel 1 unless ``costs``/``indel`` say otherwise; ``hamming`` uses
    unit costs; ``dhd`` estimates its time-varying costs from the set
    itself. Results are deterministic and independent of ``threads``.
    """
    import numba

    if metric not in METRICS:
        raise ValidationError(f"unknown metric {metric!r}, expected one of {METRICS}")
    a = seq_set.alphabet.size
    codes = np.ascontiguousarray(seq_set.codes)
    n = seq_set.n
    out = np.zeros(n * (n - 1) // 2, dtype=np.float64)

    n_threads = _resolve_threads(threads)
    previous = numba.get_num_threads()
    numba.set_num_threads(n_threads)
    try:
        if metric == "lcs":
            if costs is not None or indel is not None:
                raise ValidationError("the lcs metric takes no cost parameters")
            if seq_set.length <= _kernels.BITPARALLEL_MAX_LEN:
                masks = _kernels.build_masks(codes, a)
                _kernels.pairwise_lcs_bits(codes, masks, out)
            else:
                _kernels.pairwise_lcs_dp(codes, out)
        elif metric == "om":
            if costs is None:
                costs = constant_costs(a, substitution=2.0, indel=1.0)
            if not isinstance(costs, SubstitutionCostMatrix):
                raise ValidationError("om needs a SubstitutionCostMatrix")
            if costs.size != a:
                raise ValidationError(
                    f"cost matrix covers {costs.size} states, alphabet has {a}"
                )
            eff_indel = float(costs.indel if indel is None else indel)
            if eff_indel <= 0:
                raise ValidationError("indel cost must be positive")
            _kernels.pairwise_om(codes, costs.costs, eff_indel, out)
        elif metric == "hamming":
            if indel is not None:
                raise ValidationError("hamming takes no indel cost")
            if costs is None:
                costs = constant_costs(a, substitution=1.0, indel=1.0)
            if not isinstance(costs, SubstitutionCostMatrix):
                raise ValidationError("hamming needs a SubstitutionCostMatrix")
            if costs.size != a:
                raise ValidationError(
                    f"cost matrix covers {costs.size} states, alphabet has {a}"
                )
            _kernels.pairwise_positionwise(codes, costs.costs, out)
        else:  # dhd
            if indel is not None:
                raise ValidationError("dhd takes no indel cost")
            if costs is None:
                costs = dhd_costs(seq_set)
            if not isinstance(costs, TimeVaryingCosts):
                raise ValidationError("dhd needs TimeVaryingCosts")
            if costs.length != seq_set.length or costs.size != a:
                raise ValidationError(
                    f"time-varying costs cover {costs.length} positions x "
                    f"{costs.size} states, set has {seq_set.length} x {a}"
                )
            _kernels.pairwise_timevarying(codes, costs.costs_by_time, out)
    finally:
        numba.set_num_threads(previous)
    return DissimilarityMatrix(n=n, values=out, metric_tag=metric)


@dataclass(frozen=True)
class TriangleAuditResult:
    checked: int
    violations: int
    worst_excess: float


def triangle_audit(
    matrix: DissimilarityMatrix,
    samples: int = 10_000,
    seed: int = 0,
    tol: float = 1e-9,
) -> TriangleAuditResult:
    """Sampled triangle-inequality check on a finished matrix.

    Draws ``samples`` random triples (i, j, k) and counts how often
    d(i, k) exceeds d(i, j) + d(j, k) by more than ``tol``. Useful as a
    diagnostic for user-supplied cost matrices, which can break
    metricity.
    """
    n = matrix.n
    if n < 3:
        return TriangleAuditResult(checked=0, violations=0, worst_excess=0.0)
    rng = np.random.Generator(np.random.Philox(key=seed))
    violations = 0
    worst = 0.0
    for _ in range(samples):
        i, j, k = rng.choice(n, size=3, replace=False)
        excess = matrix.get(i, k) - (matrix.get(i, j) + matrix.get(j, k))
        if excess > tol:
            violations += 1
            worst = max(worst, excess)
    return TriangleAuditResult(checked=samples, violations=violations, worst_excess=worst)


# ---------------------------------------------------------------------------
# Matrix and cost I/O


def write_matrix_csv(matrix: DissimilarityMatrix, subject_ids: Sequence[str], path) -> None:
    if len(subject_ids) != matrix.n:
        raise ValidationError("subject id count does not match matrix size")
    square = matrix.toarray()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id"] + list(subject_ids))
        for i, sid in enumerate(subject_ids):
            writer.writerow([sid] + [repr(float(v)) for v in square[i]])


def read_matrix_csv(path) -> tuple[DissimilarityMatrix, list[str]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["id"]:
        raise ValidationError('matrix CSV must start with an "id" header')
    ids = rows[0][1:]
    n = len(ids)
    if len(rows) != n + 1:
        raise ValidationError(f"matrix CSV has {len(rows) - 1} rows for {n} ids")
    square = np.empty((n, n), dtype=np.float64)
    for i, row in enumerate(rows[1:]):
        if len(row) != n + 1:
            raise ValidationError(f"matrix CSV row {i + 2} has {len(row)} cells")
        square[i] = [float(v) for v in row[1:]]
    return DissimilarityMatrix.from_square(square), ids


def write_matrix_binary(matrix: DissimilarityMatrix, path) -> None:
    """Binary layout: magic "SQDM", u16 version, u32 n, then the packed
    lower triangle as little-endian float64."""
    with open(path, "wb") as fh:
        fh.write(SQDM_MAGIC)
        fh.write(struct.pack("<HI", SQDM_VERSION, matrix.n))
        fh.write(matrix.values.astype("<f8").tobytes())


def read_matrix_binary(path) -> DissimilarityMatrix:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != SQDM_MAGIC:
        raise ValidationError("not a SQDM file (bad magic)")
    version, n = struct.unpack("<HI", blob[4:10])
    if version != SQDM_VERSION:
        raise ValidationError(f"unsupported SQDM version {version}")
    expected = n * (n - 1) // 2
    values = np.frombuffer(blob[10:], dtype="<f8")
    if values.shape[0] != expected:
        raise ValidationError(
            f"SQDM payload has {values.shape[0]} values, expected {expected} for n={n}"
        )
    return DissimilarityMatrix(n=n, values=values.astype(np.float64))


def write_cost_csv(costs: SubstitutionCostMatrix, states: Sequence[str], path) -> None:
    if len(states) != costs.size:
        raise ValidationError("state count does not match cost matrix size")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["state"] + list(states))
        for i, s in enumerate(states):
            writer.writerow([s] + [repr(float(v)) for v in costs.costs[i]])


def read_cost_csv(path, indel: float = 1.0) -> tuple[SubstitutionCostMatrix, list[str]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["state"]:
        raise ValidationError('cost CSV must start with a "state" header')
    states = rows[0][1:]
    n = len(states)
    if len(rows) != n + 1:
        raise ValidationError(f"cost CSV has {len(rows) - 1} rows for {n} states")
    costs = np.empty((n, n), dtype=np.float64)
    for i, row in enumerate(rows[1:]):
        if len(row) != n + 1 or row[0] != states[i]:
            raise ValidationError(f"cost CSV row {i + 2} is malformed")
        costs[i] = [float(v) for v in row[1:]]
    return SubstitutionCostMatrix(costs=costs, indel=indel, source="user"), states
