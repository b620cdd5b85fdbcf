"""Time-to-event association between trajectory groups and an outcome.

Fits Cox proportional-hazards models by damped Newton iterations on the
partial likelihood, with Efron's tie correction by default (event times
on a coarse grid produce heavy ties) and Breslow available by flag. The
two coincide when no event times tie. Confidence intervals are Wald
intervals on the log hazard-ratio scale.

``build_design`` turns cluster labels and per-sequence indicators into
the standard covariate layout: one dummy per cluster with cluster 1 (the
largest) as the reference, plus binary high-entropy and high-turbulence
flags split at the cohort mean (below the mean is the reference).

Risk-set sums are accumulated in descending time order with fixed
ordering, so fits are deterministic.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import norm as _norm

from .clustering import ClusterAssignment
from .errors import ComputationError, ValidationError
from .indicators import IndicatorRow

TIE_METHODS = ("efron", "breslow")
_Z975 = float(_norm.ppf(0.975))
_MAX_ABS_COEF = 15.0  # log scale; beyond this the likelihood is effectively monotone


@dataclass(frozen=True)
class SurvivalRecord:
    subject_id: str
    time: float
    event: bool
    covariates: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.time > 0:
            raise ValidationError(
                f"subject {self.subject_id!r}: follow-up time must be positive"
            )
        if not all(np.isfinite(self.covariates)):
            raise ValidationError(f"subject {self.subject_id!r}: non-finite covariate")


@dataclass(frozen=True)
class CoxFit:
    names: tuple[str, ...]
    coefficients: np.ndarray
    standard_errors: np.ndarray
    hazard_ratios: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    log_likelihood: float
    null_log_likelihood: float
    iterations: int
    ties: str
    n: int
    n_events: int


def _partial_likelihood(
    beta: np.ndarray,
    times: np.ndarray,
    events: np.ndarray,
    x: np.ndarray,
    ties: str,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Log partial likelihood, gradient, and observed information."""
    n, p = x.shape
    order = np.argsort(-times, kind="stable")
    t_s = times[order]
    e_s = events[order]
    x_s = x[order]
    eta = x_s @ beta
    eta = np.clip(eta, -500, 500)  # guards exp overflow during step search
    theta = np.exp(eta)
    thx = theta[:, None] * x_s
    thxx = theta[:, None, None] * (x_s[:, :, None] * x_s[:, None, :])
    cum_s = np.cumsum(theta)
    cum_z = np.cumsum(thx, axis=0)
    cum_q = np.cumsum(thxx, axis=0)

    boundaries = np.flatnonzero(np.diff(t_s) != 0)
    group_ends = np.append(boundaries, n - 1)
    group_starts = np.append(0, boundaries + 1)

    ll = 0.0
    grad = np.zeros(p)
    info = np.zeros((p, p))
    for lo, hi in zip(group_starts, group_ends):
        members = np.arange(lo, hi + 1)
        dead = members[e_s[lo : hi + 1]]
        d = dead.size
        if d == 0:
            continue
        s_r = cum_s[hi]
        z_r = cum_z[hi]
        q_r = cum_q[hi]
        s_d = theta[dead].sum()
        z_d = thx[dead].sum(axis=0)
        q_d = thxx[dead].sum(axis=0)
        ll += float(eta[dead].sum())
        if ties == "efron":
            fracs = np.arange(d) / d
        else:
            fracs = np.zeros(d)
        for f in fracs:
            denom = s_r - f * s_d
            num = z_r - f * z_d
            ll -= float(np.log(denom))
            grad -= num / denom
            info += (q_r - f * q_d) / denom - np.outer(num, num) / denom**2
        grad += x_s[dead].sum(axis=0)
    return ll, grad, info


def cox_fit(
    records: Sequence[SurvivalRecord],
    names: Sequence[str] | None = None,
    ties: str = "efron",
    max_iter: int = 50,
    tol: float = 1e-9,
) -> CoxFit:
    """Maximize the partial likelihood by Newton iterations with
    step-halving on any likelihood decrease.

    Convergence requires the relative log-likelihood change to fall
    below ``tol`` and the gradient max-norm below 1e-8 (Newton gets
    there in one or two extra steps once the likelihood stabilizes).
    """
    if ties not in TIE_METHODS:
        raise ValidationError(f"ties must be one of {TIE_METHODS}")
    if not records:
        raise ValidationError("no survival records")
    times = np.array([r.time for r in records], dtype=np.float64)
    events = np.array([r.event for r in records], dtype=bool)
    x = np.array([r.covariates for r in records], dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError("covariate vectors must have equal lengths")
    n, p = x.shape
    if names is None:
        names = tuple(f"x{j + 1}" for j in range(p))
    names = tuple(names)
    if len(names) != p:
        raise ValidationError(f"{len(names)} names for {p} covariates")
    if events.sum() < 1:
        raise ComputationError("no events: the partial likelihood is undefined")
    if p == 0:
        ll0, _, _ = _partial_likelihood(np.zeros(0), times, events, x, ties)
        return CoxFit(
            names=(),
            coefficients=np.zeros(0),
            standard_errors=np.zeros(0),
            hazard_ratios=np.zeros(0),
            ci_low=np.zeros(0),
            ci_high=np.zeros(0),
            log_likelihood=ll0,
            null_log_likelihood=ll0,
            iterations=0,
            ties=ties,
            n=n,
            n_events=int(events.sum()),
        )

    center = x.mean(axis=0)
    xc = x - center  # shift-invariant model; centering helps conditioning
    zero_var = np.flatnonzero(np.all(xc == 0, axis=0))
    if zero_var.size:
        bad = ", ".join(names[j] for j in zero_var)
        raise ComputationError(f"rank deficiency: covariate(s) {bad} are constant")
    if np.linalg.matrix_rank(xc) < p:
        raise ComputationError("rank deficiency: covariates are collinear")

    beta = np.zeros(p)
    ll, grad, info = _partial_likelihood(beta, times, events, xc, ties)
    null_ll = ll
    iterations = 0
    for iterations in range(1, max_iter + 1):
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            raise ComputationError(
                "singular information matrix: covariates are collinear on the risk sets"
            ) from None
        new_beta = beta + step
        new_ll, new_grad, new_info = _partial_likelihood(new_beta, times, events, xc, ties)
        # halve on a real decrease only; decreases at float-noise scale
        # would otherwise reject the final, fully converged Newton step
        noise = 1e-10 * max(1.0, abs(ll))
        halvings = 0
        while (not np.isfinite(new_ll) or new_ll < ll - noise) and halvings < 40:
            step = step / 2.0
            new_beta = beta + step
            new_ll, new_grad, new_info = _partial_likelihood(
                new_beta, times, events, xc, ties
            )
            halvings += 1
        beta, grad, info = new_beta, new_grad, new_info
        worst = int(np.argmax(np.abs(beta)))
        if abs(beta[worst]) > _MAX_ABS_COEF:
            raise ComputationError(
                "monotone likelihood (separation): coefficient for "
                f"{names[worst]!r} is diverging (beta={beta[worst]:.1f})"
            )
        rel_change = abs(new_ll - ll) / max(1.0, abs(ll))
        ll = new_ll
        if rel_change < tol and float(np.max(np.abs(grad))) < 1e-8:
            break
    else:
        raise ComputationError(f"Newton iterations did not converge in {max_iter} steps")

    covariance = np.linalg.inv(info)
    se = np.sqrt(np.diag(covariance))
    return CoxFit(
        names=names,
        coefficients=beta,
        standard_errors=se,
        hazard_ratios=np.exp(beta),
        ci_low=np.exp(beta - _Z975 * se),
        ci_high=np.exp(beta + _Z975 * se),
        log_likelihood=ll,
        null_log_likelihood=null_ll,
        iterations=iterations,
        ties=ties,
        n=n,
        n_events=int(events.sum()),
    )


def partial_log_likelihood(
    beta: Sequence[float], records: Sequence[SurvivalRecord], ties: str = "efron"
) -> float:
    """The raw objective, exposed so tests can difference it numerically."""
    times = np.array([r.time for r in records], dtype=np.float64)
    events = np.array([r.event for r in records], dtype=bool)
    x = np.array([r.covariates for r in records], dtype=np.float64)
    ll, _, _ = _partial_likelihood(np.asarray(beta, dtype=np.float64), times, events, x, ties)
    return ll


def partial_gradient(
    beta: Sequence[float], records: Sequence[SurvivalRecord], ties: str = "efron"
) -> np.ndarray:
    times = np.array([r.time for r in records], dtype=np.float64)
    events = np.array([r.event for r in records], dtype=bool)
    x = np.array([r.covariates for r in records], dtype=np.float64)
    _, grad, _ = _partial_likelihood(np.asarray(beta, dtype=np.float64), times, events, x, ties)
    return grad


# ---------------------------------------------------------------------------
# Design construction


def build_design(
    subject_ids: Sequence[str],
    assignment: ClusterAssignment,
    indicators: Sequence[IndicatorRow],
    outcomes: Mapping[str, tuple[float, bool]],
) -> tuple[list[SurvivalRecord], tuple[str, ...]]:
    """Dummy-coded design: cluster 2..k against cluster 1, plus
    high-entropy and high-turbulence flags split at the cohort mean.

    ``subject_ids`` fixes the row order and must match the assignment;
    indicators and outcomes are joined by subject id.
    """
    if len(subject_ids) != assignment.n:
        raise ValidationError("subject id count does not match the assignment")
    ind_by_id = {row.subject_id: row for row in indicators}
    missing_ind = [sid for sid in subject_ids if sid not in ind_by_id]
    if missing_ind:
        raise ValidationError(
            f"indicator rows missing for {len(missing_ind)} subject(s), "
            f"first: {missing_ind[0]!r}"
        )
    missing_out = [sid for sid in subject_ids if sid not in outcomes]
    if missing_out:
        raise ValidationError(
            f"outcome rows missing for {len(missing_out)} subject(s), "
            f"first: {missing_out[0]!r}"
        )
    entropies = np.array([ind_by_id[sid].entropy for sid in subject_ids])
    turbulences = np.array([ind_by_id[sid].turbulence for sid in subject_ids])
    mean_entropy = float(entropies.mean())
    mean_turbulence = float(turbulences.mean())

    k = assignment.k
    names = tuple(f"cluster_{c}" for c in range(2, k + 1)) + (
        "high_entropy",
        "high_turbulence",
    )
    records = []
    for i, sid in enumerate(subject_ids):
        label = int(assignment.labels[i])
        dummies = [1.0 if label == c else 0.0 for c in range(2, k + 1)]
        time, event = outcomes[sid]
        records.append(
            SurvivalRecord(
                subject_id=sid,
                time=float(time),
                event=bool(event),
                covariates=tuple(
                    dummies
                    + [
                        1.0 if entropies[i] >= mean_entropy else 0.0,
                        1.0 if turbulences[i] >= mean_turbulence else 0.0,
                    ]
                ),
            )
        )
    return records, names


# ---------------------------------------------------------------------------
# Report


@dataclass(frozen=True)
class AssociationReport:
    names: tuple[str, ...]
    univariable: tuple[CoxFit, ...]
    adjusted: CoxFit

    def to_csv_rows(self) -> list[list[str]]:
        rows = [
            [
                "covariate",
                "univariable_hr",
                "univariable_ci_low",
                "univariable_ci_high",
                "adjusted_hr",
                "adjusted_ci_low",
                "adjusted_ci_high",
            ]
        ]
        for j, name in enumerate(self.names):
            uni = self.univariable[j]
            rows.append(
                [
                    name,
                    repr(float(uni.hazard_ratios[0])),
                    repr(float(uni.ci_low[0])),
                    repr(float(uni.ci_high[0])),
                    repr(float(self.adjusted.hazard_ratios[j])),
                    repr(float(self.adjusted.ci_low[j])),
                    repr(float(self.adjusted.ci_high[j])),
                ]
            )
        return rows

    def to_text(self) -> str:
        def cell(hr: float, lo: float, hi: float) -> str:
            return f"{hr:.2f} ({lo:.2f} - {hi:.2f})"

        width = max(len(n) for n in self.names) + 2
        lines = [
            f"{'covariate':<{width}}{'univariable HR (95% CI)':<26}adjusted HR (95% CI)"
        ]
        for j, name in enumerate(self.names):
            uni = self.univariable[j]
            lines.append(
                f"{name:<{width}}"
                f"{cell(float(uni.hazard_ratios[0]), float(uni.ci_low[0]), float(uni.ci_high[0])):<26}"
                f"{cell(float(self.adjusted.hazard_ratios[j]), float(self.adjusted.ci_low[j]), float(self.adjusted.ci_high[j]))}"
            )
        lines.append("")
        lines.append(
            "references: cluster 1; below-mean entropy; below-mean turbulence."
        )
        lines.append(
            f"adjusted model: {self.adjusted.n} subjects, {self.adjusted.n_events} events, "
            f"ties={self.adjusted.ties}."
        )
        lines.append(
            "caution: subjects under more intensive care are often those with worse"
        )
        lines.append(
            "baseline status, so a positive association between care intensity and the"
        )
        lines.append(
            "outcome can reflect confounding by severity rather than a causal effect."
        )
        return "\n".join(lines) + "\n"


def univariable_and_adjusted(
    records: Sequence[SurvivalRecord],
    names: Sequence[str],
    ties: str = "efron",
) -> AssociationReport:
    """One single-covariate fit per covariate plus the joint fit."""
    names = tuple(names)
    p = len(names)
    if not records or len(records[0].covariates) != p:
        raise ValidationError("records and names disagree on the covariate count")
    univariable = []
    for j in range(p):
        single = [
            SurvivalRecord(
                subject_id=r.subject_id,
                time=r.time,
                event=r.event,
                covariates=(r.covariates[j],),
            )
            for r in records
        ]
        univariable.append(cox_fit(single, names=(names[j],), ties=ties))
    adjusted = cox_fit(records, names=names, ties=ties)
    return AssociationReport(
        names=names, univariable=tuple(univariable), adjusted=adjusted
    )


# ---------------------------------------------------------------------------
# Outcome file I/O


def read_outcome_csv(path) -> dict[str, tuple[float, bool]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["id", "time", "event"]:
        raise ValidationError('outcome CSV must have header "id,time,event"')
    out: dict[str, tuple[float, bool]] = {}
    for r, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise ValidationError(f"outcome CSV row {r} has {len(row)} cells")
        if row[2] not in ("0", "1"):
            raise ValidationError(f"outcome CSV row {r}: event must be 0 or 1")
        try:
            time = float(row[1])
        except ValueError:
            raise ValidationError(f"outcome CSV row {r}: bad time {row[1]!r}") from None
        out[row[0]] = (time, row[2] == "1")
    return out


def write_outcome_csv(outcomes: Mapping[str, tuple[float, bool]], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "time", "event"])
        for sid, (time, event) in outcomes.items():
            writer.writerow([sid, repr(float(time)), int(event)])
