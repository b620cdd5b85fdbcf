"""Command-line front door.

Wires ingestion -> descriptives -> indicators -> distances -> clustering
-> profiling -> outcome association -> plots, one subcommand per stage
plus ``pipeline`` to chain them from a single config file. Every
subcommand writes a JSON manifest next to its outputs recording input
content hashes, parameters, and the seed, so a rerun with identical
inputs is byte-identical (timestamps live in a ``.times.json`` sidecar).

Exit codes: 0 success, 1 validation error, 2 computational error.
Messages go to standard error; ``--json-errors`` switches them to a
machine-readable JSON object.

The config file is flat ``key = value`` text: blank lines and ``#``
comments are ignored, keys mirror the pipeline flags, and flags given on
the command line win over the file.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__, clustering, descriptives, dissimilarity, indicators, plots
from . import survival as survival_mod
from . import synth
from .core import (
    SequenceSet,
    read_alphabet_json,
    read_spell_csv,
    read_wide_csv,
    spells_to_wide,
    write_alphabet_json,
    write_wide_csv,
)
from .errors import ComputationError, SeqpathError, ValidationError
from .manifest import build_hash, write_manifest

BINARY_MATRIX_THRESHOLD = 500  # above this n, dist defaults to the binary format


def _fail(message: str, code: int) -> None:
    if "--json-errors" in sys.argv:
        kind = "validation" if code == 1 else "computation"
        sys.stderr.write(json.dumps({"error": {"type": kind, "message": message}}) + "\n")
    else:
        sys.stderr.write(f"error: {message}\n")
    sys.exit(code)


def main() -> None:
    try:
        cli.main(standalone_mode=False)
    except ValidationError as exc:
        _fail(str(exc), 1)
    except ComputationError as exc:
        _fail(str(exc), 2)
    except SeqpathError as exc:
        _fail(str(exc), 1)
    except click.UsageError as exc:
        _fail(exc.format_message(), 1)
    except click.ClickException as exc:
        _fail(exc.format_message(), 1)
    except click.Abort:
        _fail("aborted", 1)
    except OSError as exc:
        _fail(str(exc), 1)


def _print_version(ctx: click.Context, _param, value: bool) -> None:
    if not value or ctx.resilient_parsing:
        return
    click.echo(f"seqpath {__version__} (build {build_hash()})")
    ctx.exit()


def _print_defaults(ctx: click.Context, _param, value: bool) -> None:
    if not value or ctx.resilient_parsing:
        return
    for name, command in sorted(cli.commands.items()):
        click.echo(name)
        for param in command.params:
            if isinstance(param, click.Option) and not param.is_flag:
                click.echo(f"  {param.opts[0]} = {param.default}")
            elif isinstance(param, click.Option):
                click.echo(f"  {param.opts[0]} = {'on' if param.default else 'off'}")
    ctx.exit()


@click.group()
@click.option(
    "--version", is_flag=True, callback=_print_version, expose_value=False, is_eager=True,
    help="Print version and build hash.",
)
@click.option(
    "--explain", is_flag=True, callback=_print_defaults, expose_value=False, is_eager=True,
    help="Print every subcommand's defaults.",
)
@click.option("--json-errors", is_flag=True, help="Emit errors as JSON on stderr.")
def cli(json_errors: bool) -> None:
    """State-sequence analysis of longitudinal categorical pathways."""


def _load_sequences(seqs_path: str, alphabet_path: str | None, fmt: str = "wide") -> SequenceSet:
    alphabet = read_alphabet_json(alphabet_path) if alphabet_path else None
    if fmt == "wide":
        return read_wide_csv(seqs_path, alphabet=alphabet)
    if fmt == "spell":
        if alphabet is None:
            raise ValidationError("spell input needs --alphabet")
        return spells_to_wide(read_spell_csv(seqs_path), alphabet)
    raise ValidationError(f"unknown input format {fmt!r}")


def _load_matrix(path: str) -> dissimilarity.DissimilarityMatrix:
    if path.endswith(".sqdm"):
        return dissimilarity.read_matrix_binary(path)
    matrix, _ids = dissimilarity.read_matrix_csv(path)
    return matrix


def _out(out_dir: str, name: str) -> Path:
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    return directory / name


# ---------------------------------------------------------------------------
# simulate


@cli.command()
@click.option("--n", default=2329, show_default=True, help="Number of subjects.")
@click.option("--t", default=52, show_default=True, help="Positions per sequence.")
@click.option("--seed", default=0, show_default=True, help="64-bit generator seed.")
@click.option(
    "--mixture/--single", default=False, show_default=True,
    help="Three-group mixture dynamics instead of the single-matrix preset.",
)
@click.option(
    "--shares", default="0.45,0.30,0.25", show_default=True,
    help="Mixture group shares (must sum to 1).",
)
@click.option(
    "--hr", default="1,1.8,1.6", show_default=True,
    help="Outcome hazard ratio per mixture group (single mode uses 1).",
)
@click.option("--baseline-rate", default=0.01, show_default=True,
              help="Baseline event rate per time unit.")
@click.option("--censor-time", default=52.0, show_default=True,
              help="Administrative censoring time.")
@click.option("--out-dir", default=".", show_default=True)
@click.option("--prefix", default="cohort", show_default=True)
def simulate(n, t, seed, mixture, shares, hr, baseline_rate, censor_time, out_dir, prefix):
    """Draw a synthetic cohort: wide CSV, alphabet JSON, outcome CSV."""
    if n < 1 or t < 1:
        raise ValidationError("--n and --t must be positive")
    if mixture:
        share_values = tuple(float(v) for v in shares.split(","))
        specs = synth.treatment_mixture_specs(n, t, seed, shares=share_values)
        seq_set, group_labels = synth.generate_mixture(specs)
        k = 3
    else:
        spec = synth.treatment_pathway_spec(n, t, seed)
        seq_set = synth.generate_sequences(spec)
        group_labels = np.ones(n, dtype=np.int64)
        k = 1
    hr_values = tuple(float(v) for v in hr.split(","))
    if not mixture:
        hr_values = (1.0,)
    if len(hr_values) != k:
        raise ValidationError(f"--hr needs {k} value(s), got {len(hr_values)}")
    groups = clustering.ClusterAssignment(
        k=k, labels=group_labels, sizes=np.bincount(group_labels, minlength=k + 1)[1:]
    )
    outcomes = synth.generate_outcomes(
        groups, seq_set.subject_ids, hr_values, baseline_rate, censor_time, seed
    )

    seq_path = _out(out_dir, f"{prefix}.csv")
    alpha_path = _out(out_dir, f"{prefix}_alphabet.json")
    outcome_path = _out(out_dir, f"{prefix}_outcomes.csv")
    write_wide_csv(seq_set, seq_path)
    write_alphabet_json(seq_set.alphabet, alpha_path)
    survival_mod.write_outcome_csv(outcomes, outcome_path)
    outputs = [seq_path.name, alpha_path.name, outcome_path.name]
    if mixture:
        group_path = _out(out_dir, f"{prefix}_truegroups.csv")
        with open(group_path, "w", encoding="utf-8", newline="") as fh:
            fh.write("id,true_group\n")
            for sid, g in zip(seq_set.subject_ids, group_labels):
                fh.write(f"{sid},{int(g)}\n")
        outputs.append(group_path.name)
    write_manifest(
        _out(out_dir, f"{prefix}_manifest.json"),
        "simulate",
        {
            "n": n, "t": t, "mixture": mixture, "shares": shares, "hr": hr,
            "baseline_rate": baseline_rate, "censor_time": censor_time,
            "prng": "philox4x64 counter-based; key = (seed, stream<<48 | subject index)",
        },
        inputs=[],
        outputs=outputs,
        seed=seed,
    )
    click.echo(f"wrote {', '.join(outputs)} in {out_dir}")


# ---------------------------------------------------------------------------
# ingest


@cli.command()
@click.option("--input", "input_path", required=True, help="Wide or spell CSV.")
@click.option("--format", "fmt", default="wide", show_default=True,
              type=click.Choice(["wide", "spell"]))
@click.option("--alphabet", "alphabet_path", default=None,
              help="Alphabet JSON (required for spell input; inferred otherwise).")
@click.option("--id-column", default="id", show_default=True)
@click.option("--out-dir", default=".", show_default=True)
@click.option("--prefix", default="ingested", show_default=True)
def ingest(input_path, fmt, alphabet_path, id_column, out_dir, prefix):
    """Validate and normalize input into wide CSV plus alphabet JSON."""
    alphabet = read_alphabet_json(alphabet_path) if alphabet_path else None
    if fmt == "wide":
        seq_set = read_wide_csv(input_path, id_column=id_column, alphabet=alphabet)
    else:
        if alphabet is None:
            raise ValidationError("spell input needs --alphabet")
        seq_set = spells_to_wide(read_spell_csv(input_path), alphabet)
    seq_path = _out(out_dir, f"{prefix}.csv")
    alpha_path = _out(out_dir, f"{prefix}_alphabet.json")
    write_wide_csv(seq_set, seq_path)
    write_alphabet_json(seq_set.alphabet, alpha_path)
    write_manifest(
        _out(out_dir, f"{prefix}_manifest.json"),
        "ingest",
        {"format": fmt, "id_column": id_column},
        inputs=[input_path] + ([alphabet_path] if alphabet_path else []),
        outputs=[seq_path.name, alpha_path.name],
    )
    click.echo(f"{seq_set.n} sequences x {seq_set.length} positions, "
               f"{seq_set.alphabet.size} states")


# ---------------------------------------------------------------------------
# describe


@cli.command()
@click.option("--seqs", required=True, help="Wide CSV of sequences.")
@click.option("--alphabet", "alphabet_path", default=None)
@click.option("--top", default=10, show_default=True, help="Frequency table size.")
@click.option("--out-dir", default=".", show_default=True)
@click.option("--prefix", default="describe", show_default=True)
def describe(seqs, alphabet_path, top, out_dir, prefix):
    """Cohort summaries: transition matrix, state distribution,
    frequency table, modal sequence."""
    if top < 1:
        raise ValidationError("--top must be >= 1")
    seq_set = _load_sequences(seqs, alphabet_path)
    bundle = descriptives.describe_bundle(seq_set, top=top)
    tm = descriptives.transition_matrix(seq_set)
    dist = descriptives.state_distribution(seq_set)
    freq = descriptives.frequency_table(seq_set, top=top)
    bundle_path = _out(out_dir, f"{prefix}.json")
    tm_path = _out(out_dir, f"{prefix}_transitions.csv")
    dist_path = _out(out_dir, f"{prefix}_distribution.csv")
    freq_path = _out(out_dir, f"{prefix}_frequencies.csv")
    descriptives.write_describe_bundle(bundle, bundle_path)
    descriptives.write_transition_csv(tm, seq_set.alphabet, tm_path)
    descriptives.write_distribution_csv(dist, seq_set.alphabet, dist_path)
    descriptives.write_frequency_csv(freq, seq_set.alphabet, freq_path)
    write_manifest(
        _out(out_dir, f"{prefix}_manifest.json"),
        "describe",
        {"top": top},
        inputs=[seqs] + ([alphabet_path] if alphabet_path else []),
        outputs=[bundle_path.name, tm_path.name, dist_path.name, freq_path.name],
    )
    click.echo(f"modal sequence: {'-'.join(bundle['modal_sequence'])}")


# ---------------------------------------------------------------------------
# indicators


@cli.command(name="indicators")
@click.option("--seqs", required=True, help="Wide CSV of sequences.")
@click.option("--alphabet", "alphabet_path", default=None)
@click.option("--out-dir", default=".", show_default=True)
@click.option("--prefix", default="indicators", show_default=True)
def indicators_cmd(seqs, alphabet_path, out_dir, prefix):
    """Per-sequence entropy, turbulence, transitions, state durations."""
    seq_set = _load_sequences(seqs, alphabet_path)
    rows = indicators.indicator_table(seq_set)
    csv_path = _out(out_dir, f"{prefix}.csv")
    indicators.write_indicator_csv(rows, seq_set, csv_path)
    write_manifest(
        _out(out_dir, f"{prefix}_manifest.json"),
        "indicators",
        {},
        inputs=[seqs] + ([alphabet_path] if alphabet_path else []),
        outputs=[csv_path.name],
    )
    click.echo(f"wrote {csv_path}")


# ---------------------------------------------------------------------------
# dist


@cli.command()
@click.option("--seqs", required=True, help="Wide CSV of sequences.")
@click.option("--alphabet", "alphabet_path", default=None)
@click.option("--metric", default="lcs", show_default=True,
              type=click.Choice(list(dissimilarity.METRICS)))
@click.option("--costs", "costs_mode", default="constant", show_default=True,
              help="om/hamming substitution costs: constant, transition-rate, "
                   "or a cost CSV path.")
@click.option("--indel", default=None, type=float, help="om indel cost (default 1).")
@click.option("--format", "fmt", default="auto", show_default=True,
              type=click.Choice(["auto", "csv", "binary"]))
@click.option("--threads", default=None, type=int, help="Worker cap (default: all cores).")
@click.option("--audit-triangle", default=0, show_default=True,
              help="Sample this many triples and report triangle violations.")
@click.option("--out-dir", default=".", show_default=True)
@click.option("--prefix", default="dist", show_default=True)
def dist(seqs, alphabet_path, metric, costs_mode, indel, fmt, threads, audit_triangle,
         out_dir, prefix):
    """Pairwise dissimilarity matrix for one metric."""
    seq_set = _load_sequences(seqs, alphabet_path)
    costs = None
    if metric in ("om", "hamming"):
        if costs_mode == "constant":
            costs = None  # per-metric defaults
        elif costs_mode == "transition-rate":
            costs = dissimilarity.transition_rate_costs(seq_set)
        else:
            costs, _states = dissimilarity.read_cost_csv(costs_mode)
    matrix = dissimilarity.pairwise_matrix(
        seq_set, metric=metric, costs=costs, indel=indel, threads=threads
    )
    use_binary = fmt == "binary" or (fmt == "auto" and seq_set.n > BINARY_MATRIX_THRESHOLD)
    if use_binary:
        matrix_path = _out(out_dir, f"{prefix}.sqdm")
        dissimilarity.write_matrix_binary(matrix, matrix_path)
    else:
        matrix_path = _out(out_dir, f"{prefix}.csv")
        dissimilarity.write_matrix_csv(matrix, seq_set.subject_ids, matrix_path)
    outputs = [matrix_path.name]
    if audit_triangle > 0:
        audit = dissimilarity.triangle_audit(matrix, samples=audit_triangle)
        click.echo(
            f"triangle audit: {audit.violations} violation(s) in {audit.checked} "
            f"sampled triples (worst excess {audit.worst_excess:.6g})"
        )
    write_manifest(
        _out(out_dir, f"{prefix}_manifest.json"),
        "dist",
        {"metric": metric, "costs": costs_mode, "indel": indel, "format": fmt,
         "threads": threads},
        inputs=[seqs] + ([alphabet_path] if alphabet_path else []),
        outputs=outputs,
    )
    click.echo(f"wrote {matrix_path}")


# ---------------------------------------------------------------------------
# cluster


@cli.command()
@click.option("--matrix", "matrix_path", required=True, help="Matrix CSV or .sqdm file.")
@click.option("--seqs", default=None,
              help="Wide CSV for subject ids (required with .sqdm input).")
@click.option("--k", required=True, type=int, help="Number of clusters to cut.")
@click.option("--out-dir", default=".", show_default=True)
@click.option("--prefix", default="cluster", show_default=True)
def cluster(matrix_path, seqs, k, out_dir, prefix):
    """Ward tree, cut at k, plus silhouette diagnostics for k=2..8."""
    if matrix_path.endswith(".sqdm"):
        matrix = dissimilarity.read_matrix_binary(matrix_path)
        if seqs is None:
            raise ValidationError(".sqdm matrices carry no ids; pass --seqs as well")
        ids = list(read_wide_csv(seqs).subject_ids)
    else:
        matrix, ids = dissimilarity.read_matrix_csv(matrix_path)
    if k < 1 or k > matrix.n:
        raise ValidationError(f"--k must be in 1..{matrix.n}, got {k}")
    if len(ids) != matrix.n:
        raise ValidationError("id count does not match the matrix size")
    tree = clustering.ward_cluster(matrix)
    assignment = clustering.cut_tree(tree, k)
    diagnostics = clustering.silhouette_profile(matrix, tree)

    tree_path = _out(out_dir, f"{prefix}_dendrogram.json")
    assign_path = _out(out_dir, f"{prefix}_assignment.csv")
    silh_path = _out(out_dir, f"{prefix}_silhouette.csv")
    with open(tree_path, "w", encoding="utf-8") as fh:
        fh.write(tree.to_json())
    clustering.write_assignment_csv(assignment, ids, assign_path)
    with open(silh_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("k,mean_silhouette\n")
        for kk, value in diagnostics.items():
            fh.write(f"{kk},{value!r}\n")
    write_manifest(
        _out(out_dir, f"{prefix}_manifest.json"),
        "cluster",
        {"k": k},
        inputs=[matrix_path] + ([seqs] if seqs else []),
        outputs=[tree_path.name, assign_path.name, silh_path.name],
    )
    sizes = ", ".join(str(int(s)) for s in assignment.sizes)
    click.echo(f"cluster sizes: {sizes}")
    for kk, value in diagnostics.items():
        click.echo(f"silhouette k={kk}: {value:.4f}")


# ---------------------------------------------------------------------------
# profile


@cli.command()
@click.option("--seqs", required=True)
@click.option("--alphabet", "alphabet_path", default=None)
@click.option("--assignment", "assignment_path", required=True, help="id,cluster CSV.")
@click.option("--covariates", "covariates_path", default=None,
              help="Covariates CSV (id + columns). Default: derived from the "
                   "sequences (dominant state, entropy, turbulence, time in state).")
@click.option("--out-dir", default=".", show_default=True)
@click.option("--prefix", default="profile", show_default=True)
def profile(seqs, alphabet_path, assignment_path, covariates_path, out_dir, prefix):
    """Per-cluster covariate table with chi-squared tests."""
    seq_set = _load_sequences(seqs, alphabet_path)
    assignment, ids = clustering.read_assignment_csv(assignment_path)
    if tuple(ids) != seq_set.subject_ids:
        raise ValidationError("assignment ids do not match the sequence file")
    if covariates_path:
        covariates = descriptives.read_covariates_csv(covariates_path)
    else:
        covariates = _derived_covariates(seq_set)
    report = descriptives.cluster_profile(seq_set, assignment, covariates)
    csv_path = _out(out_dir, f"{prefix}.csv")
    text_path = _out(out_dir, f"{prefix}.txt")
    import csv as _csv

    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        _csv.writer(fh, lineterminator="\n").writerows(report.to_csv_rows())
    with open(text_path, "w", encoding="utf-8") as fh:
        fh.write(report.to_text())
    write_manifest(
        _out(out_dir, f"{prefix}_manifest.json"),
        "profile",
        {"covariates": covariates_path or "derived"},
        inputs=[seqs, assignment_path]
        + ([alphabet_path] if alphabet_path else [])
        + ([covariates_path] if covariates_path else []),
        outputs=[csv_path.name, text_path.name],
    )
    click.echo(report.to_text())


def _derived_covariates(seq_set: SequenceSet) -> dict[str, dict[str, str]]:
    rows = indicators.indicator_table(seq_set)
    states = seq_set.alphabet.states
    table: dict[str, dict[str, str]] = {"dominant_state": {}, "entropy": {}, "turbulence": {}}
    for s in states:
        table[f"time_in_{s}"] = {}
    for seq, row in zip(seq_set.sequences, rows):
        dominant = states[int(np.argmax(row.time_in_state))]
        table["dominant_state"][seq.subject_id] = dominant
        table["entropy"][seq.subject_id] = repr(row.entropy)
        table["turbulence"][seq.subject_id] = repr(row.turbulence)
        for s, count in zip(states, row.time_in_state):
            table[f"time_in_{s}"][seq.subject_id] = str(count)
    return table


# ---------------------------------------------------------------------------
# assoc


@cli.command()
@click.option("--seqs", required=True)
@click.option("--alphabet", "alphabet_path", default=None)
@click.option("--assignment", "assignment_path", required=True)
@click.option("--outcomes", "outcomes_path", required=True, help="id,time,event CSV.")
@click.option("--ties", default="efron", show_default=True,
              type=click.Choice(list(survival_mod.TIE_METHODS)))
@click.option("--out-dir", default=".", show_default=True)
@click.option("--prefix", default="assoc", show_default=True)
def assoc(seqs, alphabet_path, assignment_path, outcomes_path, ties, out_dir, prefix):
    """Cox models: clusters and indicator strata against the outcome."""
    seq_set = _load_sequences(seqs, alphabet_path)
    assignment, ids = clustering.read_assignment_csv(assignment_path)
    if tuple(ids) != seq_set.subject_ids:
        raise ValidationError("assignment ids do not match the sequence file")
    outcomes = survival_mod.read_outcome_csv(outcomes_path)
    rows = indicators.indicator_table(seq_set)
    records, names = survival_mod.build_design(seq_set.subject_ids, assignment, rows, outcomes)
    report = survival_mod.univariable_and_adjusted(records, names, ties=ties)
    csv_path = _out(out_dir, f"{prefix}.csv")
    text_path = _out(out_dir, f"{prefix}.txt")
    import csv as _csv

    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        _csv.writer(fh, lineterminator="\n").writerows(report.to_csv_rows())
    with open(text_path, "w", encoding="utf-8") as fh:
        fh.write(report.to_text())
    write_manifest(
        _out(out_dir, f"{prefix}_manifest.json"),
        "assoc",
        {"ties": ties},
        inputs=[seqs, assignment_path, outcomes_path]
        + ([alphabet_path] if alphabet_path else []),
        outputs=[csv_path.name, text_path.name],
    )
    click.echo(report.to_text())


# ---------------------------------------------------------------------------
# plot


@cli.command()
@click.option("--seqs", required=True)
@click.option("--alphabet", "alphabet_path", default=None)
@click.option("--assignment", "assignment_path", default=None,
              help="Optional id,cluster CSV for per-cluster panels.")
@click.option("--width", default=800, show_default=True)
@click.option("--height", default=480, show_default=True)
@click.option("--sort", default="input", show_default=True,
              type=click.Choice(list(plots.SORT_KEYS)))
@click.option("--legend/--no-legend", default=True, show_default=True)
@click.option("--top", default=10, show_default=True, help="Frequency plot entries.")
@click.option("--out-dir", default=".", show_default=True)
@click.option("--prefix", default="plot", show_default=True)
def plot(seqs, alphabet_path, assignment_path, width, height, sort, legend, top,
         out_dir, prefix):
    """Render index, distribution, frequency, and modal SVG plots."""
    seq_set = _load_sequences(seqs, alphabet_path)
    assignment = None
    if assignment_path:
        assignment, ids = clustering.read_assignment_csv(assignment_path)
        if tuple(ids) != seq_set.subject_ids:
            raise ValidationError("assignment ids do not match the sequence file")
    config = plots.PlotConfig(width=width, height=height, sort=sort, legend=legend)
    outputs: list[str] = []

    def emit(name: str, svg: str) -> None:
        path = _out(out_dir, name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(svg)
        outputs.append(name)

    emit(f"{prefix}_index.svg", plots.index_plot(seq_set, assignment, config))
    emit(
        f"{prefix}_dist.svg",
        plots.distribution_plot(
            descriptives.state_distribution(seq_set), seq_set.alphabet, config
        ),
    )
    emit(
        f"{prefix}_freq.svg",
        plots.frequency_plot(
            descriptives.frequency_table(seq_set, top=top), seq_set.alphabet, config
        ),
    )
    emit(f"{prefix}_modal.svg", plots.modal_plot(seq_set, assignment, config))
    if assignment is not None:
        for c in range(1, assignment.k + 1):
            members = tuple(
                seq_set.sequences[i] for i in np.flatnonzero(assignment.labels == c)
            )
            subset = SequenceSet(
                alphabet=seq_set.alphabet,
                sequences=members,
                granularity_label=seq_set.granularity_label,
            )
            emit(
                f"{prefix}_dist_cluster{c}.svg",
                plots.distribution_plot(
                    descriptives.state_distribution(subset), subset.alphabet, config
                ),
            )
            emit(
                f"{prefix}_freq_cluster{c}.svg",
                plots.frequency_plot(
                    descriptives.frequency_table(subset, top=top), subset.alphabet, config
                ),
            )
    write_manifest(
        _out(out_dir, f"{prefix}_manifest.json"),
        "plot",
        {"width": width, "height": height, "sort": sort, "legend": legend, "top": top},
        inputs=[seqs]
        + ([alphabet_path] if alphabet_path else [])
        + ([assignment_path] if assignment_path else []),
        outputs=outputs,
    )
    click.echo(f"wrote {len(outputs)} SVG file(s) in {out_dir}")


# ---------------------------------------------------------------------------
# pipeline


_PIPELINE_KEYS = {
    "seqs": None, "alphabet": None, "outcomes": None, "covariates": None,
    "simulate": "false", "n": "2329", "t": "52", "mixture": "true",
    "shares": "0.45,0.30,0.25", "hr": "1,1.8,1.6",
    "baseline_rate": "0.01", "censor_time": "52",
    "metric": "lcs", "k": "3", "top": "10", "ties": "efron",
    "threads": None, "seed": "0", "out_dir": "out", "prefix": "run",
}


def parse_config(text: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _PIPELINE_KEYS:
            raise ValidationError(f"config line {lineno}: unknown key {key!r}")
        values[key] = value.strip()
    return values


@cli.command()
@click.option("--config", "config_path", default=None, help="key = value config file.")
@click.option("--seqs", default=None, help="Wide CSV (skips the simulate stage).")
@click.option("--alphabet", "alphabet_path", default=None)
@click.option("--outcomes", "outcomes_path", default=None)
@click.option("--covariates", "covariates_path", default=None)
@click.option("--metric", default=None, type=click.Choice(list(dissimilarity.METRICS)))
@click.option("--k", default=None, type=int)
@click.option("--seed", default=None, type=int)
@click.option("--threads", default=None, type=int)
@click.option("--out-dir", default=None)
@click.option("--prefix", default=None)
def pipeline(config_path, seqs, alphabet_path, outcomes_path, covariates_path,
             metric, k, seed, threads, out_dir, prefix):
    """Run the whole flow with one config: data, descriptives,
    indicators, distances, clusters, profile, association, plots."""
    settings = dict(_PIPELINE_KEYS)
    if config_path:
        with open(config_path, "r", encoding="utf-8") as fh:
            settings.update(parse_config(fh.read()))
    overrides = {
        "seqs": seqs, "alphabet": alphabet_path, "outcomes": outcomes_path,
        "covariates": covariates_path, "metric": metric, "k": k, "seed": seed,
        "threads": threads, "out_dir": out_dir, "prefix": prefix,
    }
    for key, value in overrides.items():
        if value is not None:
            settings[key] = str(value)

    out_directory = settings["out_dir"]
    run_prefix = settings["prefix"]
    run_seed = int(settings["seed"])
    k_value = int(settings["k"])
    inputs_for_manifest: list[str] = [config_path] if config_path else []

    # Stage 1: data
    if settings["seqs"]:
        seq_set = _load_sequences(settings["seqs"], settings["alphabet"])
        inputs_for_manifest.append(settings["seqs"])
        outcomes_file = settings["outcomes"]
    else:
        sim_args = [
            "--n", settings["n"], "--t", settings["t"], "--seed", str(run_seed),
            "--shares", settings["shares"], "--hr", settings["hr"],
            "--baseline-rate", settings["baseline_rate"],
            "--censor-time", settings["censor_time"],
            "--out-dir", out_directory, "--prefix", f"{run_prefix}_cohort",
        ]
        sim_args.append("--mixture" if settings["mixture"] == "true" else "--single")
        simulate.callback(**_click_args(simulate, sim_args))
        seq_set = read_wide_csv(Path(out_directory) / f"{run_prefix}_cohort.csv")
        outcomes_file = str(Path(out_directory) / f"{run_prefix}_cohort_outcomes.csv")

    # Stage 2: descriptives + indicators
    bundle = descriptives.describe_bundle(seq_set, top=int(settings["top"]))
    descriptives.write_describe_bundle(bundle, _out(out_directory, f"{run_prefix}_describe.json"))
    rows = indicators.indicator_table(seq_set)
    indicators.write_indicator_csv(rows, seq_set, _out(out_directory, f"{run_prefix}_indicators.csv"))

    # Stage 3: distances
    matrix = dissimilarity.pairwise_matrix(
        seq_set,
        metric=settings["metric"],
        threads=int(settings["threads"]) if settings["threads"] else None,
    )
    if seq_set.n > BINARY_MATRIX_THRESHOLD:
        dissimilarity.write_matrix_binary(matrix, _out(out_directory, f"{run_prefix}_dist.sqdm"))
    else:
        dissimilarity.write_matrix_csv(
            matrix, seq_set.subject_ids, _out(out_directory, f"{run_prefix}_dist.csv")
        )

    # Stage 4: clustering
    tree = clustering.ward_cluster(matrix)
    assignment = clustering.cut_tree(tree, k_value)
    with open(_out(out_directory, f"{run_prefix}_dendrogram.json"), "w", encoding="utf-8") as fh:
        fh.write(tree.to_json())
    clustering.write_assignment_csv(
        assignment, seq_set.subject_ids, _out(out_directory, f"{run_prefix}_assignment.csv")
    )
    diagnostics = clustering.silhouette_profile(matrix, tree)
    with open(_out(out_directory, f"{run_prefix}_silhouette.csv"), "w", encoding="utf-8") as fh:
        fh.write("k,mean_silhouette\n")
        for kk, value in diagnostics.items():
            fh.write(f"{kk},{value!r}\n")

    # Stage 5: profile
    if settings["covariates"]:
        covariates = descriptives.read_covariates_csv(settings["covariates"])
        inputs_for_manifest.append(settings["covariates"])
    else:
        covariates = _derived_covariates(seq_set)
    report = descriptives.cluster_profile(seq_set, assignment, covariates)
    import csv as _csv

    with open(_out(out_directory, f"{run_prefix}_profile.csv"), "w", encoding="utf-8", newline="") as fh:
        _csv.writer(fh, lineterminator="\n").writerows(report.to_csv_rows())
    with open(_out(out_directory, f"{run_prefix}_profile.txt"), "w", encoding="utf-8") as fh:
        fh.write(report.to_text())

    # Stage 6: association
    if outcomes_file:
        outcomes = survival_mod.read_outcome_csv(outcomes_file)
        records, names = survival_mod.build_design(
            seq_set.subject_ids, assignment, rows, outcomes
        )
        assoc_report = survival_mod.univariable_and_adjusted(
            records, names, ties=settings["ties"]
        )
        with open(_out(out_directory, f"{run_prefix}_assoc.csv"), "w", encoding="utf-8", newline="") as fh:
            _csv.writer(fh, lineterminator="\n").writerows(assoc_report.to_csv_rows())
        with open(_out(out_directory, f"{run_prefix}_assoc.txt"), "w", encoding="utf-8") as fh:
            fh.write(assoc_report.to_text())

    # Stage 7: plots
    config = plots.PlotConfig()
    plot_outputs = {
        f"{run_prefix}_index.svg": plots.index_plot(seq_set, assignment, config),
        f"{run_prefix}_dist.svg": plots.distribution_plot(
            descriptives.state_distribution(seq_set), seq_set.alphabet, config
        ),
        f"{run_prefix}_freq.svg": plots.frequency_plot(
            descriptives.frequency_table(seq_set, top=int(settings["top"])),
            seq_set.alphabet,
            config,
        ),
        f"{run_prefix}_modal.svg": plots.modal_plot(seq_set, assignment, config),
    }
    for name, svg in plot_outputs.items():
        with open(_out(out_directory, name), "w", encoding="utf-8") as fh:
            fh.write(svg)

    produced = sorted(p.name for p in Path(out_directory).iterdir()
                      if p.name.startswith(run_prefix) and not p.name.endswith(".times.json")
                      and not p.name.endswith("_manifest.json"))
    # out_dir names a location, not the computation: keep it out of the
    # manifest so reruns into different directories stay byte-identical
    recorded = {
        key: settings[key]
        for key in sorted(settings)
        if settings[key] is not None and key != "out_dir"
    }
    write_manifest(
        _out(out_directory, f"{run_prefix}_manifest.json"),
        "pipeline",
        recorded,
        inputs=[p for p in inputs_for_manifest if p],
        outputs=produced,
        seed=run_seed,
    )
    click.echo(f"pipeline complete: {len(produced)} artifact(s) in {out_directory}")


def _click_args(command: click.Command, args: list[str]) -> dict:
    ctx = command.make_context(command.name, [str(a) for a in args], resilient_parsing=False)
    return ctx.params


if __name__ == "__main__":
    main()
