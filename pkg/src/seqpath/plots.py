"""Static SVG renderers for the four sequence visualizations.

All four plots are emitted as plain SVG text with no drawing library:
index plot (one row of colored cells per sequence), state distribution
plot (stacked bands per position), sequence frequency plot (top distinct
sequences as strips with height proportional to share), and modal plot
(the position-wise most frequent state, per cluster when labels are
given). Output is a pure function of the inputs, so files are
byte-stable for a fixed input and configuration.

Colors come from the alphabet's display metadata when present, else from
a colorblind-safe 8-color cycle; when an alphabet is larger than the
palette the cycle repeats and the legend marks reused colors with a
hatch overlay.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .clustering import ClusterAssignment
from .core import Alphabet, SequenceSet
from .descriptives import FrequencyTable, StateDistribution, modal_sequence
from .errors import ValidationError

DEFAULT_PALETTE = (
    "#E69F00",
    "#56B4E9",
    "#009E73",
    "#F0E442",
    "#0072B2",
    "#D55E00",
    "#CC79A7",
    "#999999",
)

_MARGIN = 12.0
_LEGEND_WIDTH = 170.0
_PANEL_HEADER = 16.0
SORT_KEYS = ("input", "first_state", "cluster")


@dataclass(frozen=True)
class PlotConfig:
    width: int = 800
    height: int = 480
    colors: tuple[str, ...] | None = None  # one per alphabet state
    sort: str = "input"
    legend: bool = True

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValidationError("plot dimensions must be positive")
        if self.sort not in SORT_KEYS:
            raise ValidationError(f"sort must be one of {SORT_KEYS}")


def state_colors(alphabet: Alphabet, config: PlotConfig | None = None) -> tuple[str, ...]:
    if config is not None and config.colors is not None:
        if len(config.colors) != alphabet.size:
            raise ValidationError(
                f"config has {len(config.colors)} colors for {alphabet.size} states"
            )
        return tuple(config.colors)
    out = []
    for i, state in enumerate(alphabet.states):
        out.append(alphabet.colors.get(state, DEFAULT_PALETTE[i % len(DEFAULT_PALETTE)]))
    return tuple(out)


def _rect(x: float, y: float, w: float, h: float, fill: str) -> str:
    return (
        f'<rect x="{x:.4f}" y="{y:.4f}" width="{w:.4f}" height="{h:.4f}" '
        f'fill="{fill}"/>'
    )


def _text(x: float, y: float, content: str, size: int = 11) -> str:
    return (
        f'<text x="{x:.4f}" y="{y:.4f}" font-family="sans-serif" '
        f'font-size="{size}">{escape(content)}</text>'
    )


def _document(width: int, height: int, parts: list[str]) -> str:
    body = "\n".join(parts)
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f"{body}\n</svg>\n"
    )


def _legend(alphabet: Alphabet, colors: Sequence[str], x: float, y: float) -> list[str]:
    parts = [_text(x, y, "states", size=12)]
    reused = len(alphabet.states) > len(DEFAULT_PALETTE)
    for i, state in enumerate(alphabet.states):
        sy = y + 10 + i * 18
        parts.append(_rect(x, sy, 12, 12, colors[i]))
        label = alphabet.label(i)
        if reused and i >= len(DEFAULT_PALETTE):
            # color cycle wrapped: hatch the swatch and say so
            parts.append(
                f'<line x1="{x:.4f}" y1="{sy + 12:.4f}" x2="{x + 12:.4f}" y2="{sy:.4f}" '
                'stroke="white" stroke-width="2"/>'
            )
            label += " (color reused)"
        parts.append(_text(x + 18, sy + 10, label))
    return parts


def _plot_area(config: PlotConfig) -> tuple[float, float]:
    width = config.width - 2 * _MARGIN - (_LEGEND_WIDTH if config.legend else 0.0)
    height = config.height - 2 * _MARGIN
    if width <= 0 or height <= 0:
        raise ValidationError("plot dimensions leave no drawing area")
    return width, height


def _row_order(seq_set: SequenceSet, labels: ClusterAssignment | None, sort: str) -> list[int]:
    order = list(range(seq_set.n))
    if sort == "first_state":
        order.sort(key=lambda i: (seq_set.sequences[i].states[0], i))
    elif sort == "cluster":
        if labels is None:
            raise ValidationError("sort='cluster' needs cluster labels")
        order.sort(key=lambda i: (int(labels.labels[i]), i))
    return order


def index_plot(
    seq_set: SequenceSet,
    labels: ClusterAssignment | None = None,
    config: PlotConfig | None = None,
) -> str:
    """One row of colored cells per sequence; with labels, one panel per
    cluster with rows grouped contiguously."""
    config = config or PlotConfig()
    colors = state_colors(seq_set.alphabet, config)
    area_w, area_h = _plot_area(config)
    cell_w = area_w / seq_set.length
    parts: list[str] = []

    if labels is not None and labels.n != seq_set.n:
        raise ValidationError("labels size does not match the sequence set")

    if labels is None:
        groups = [(None, _row_order(seq_set, None, config.sort))]
        header_total = 0.0
    else:
        order = _row_order(seq_set, labels, "cluster")
        groups = []
        for c in range(1, labels.k + 1):
            groups.append((c, [i for i in order if labels.labels[i] == c]))
        header_total = _PANEL_HEADER * len(groups)

    row_h = (area_h - header_total) / seq_set.n
    y = _MARGIN
    for cluster, members in groups:
        if cluster is not None:
            parts.append(_text(_MARGIN, y + 11, f"cluster {cluster} (n={len(members)})"))
            y += _PANEL_HEADER
        for i in members:
            for t, s in enumerate(seq_set.sequences[i].states):
                parts.append(_rect(_MARGIN + t * cell_w, y, cell_w, row_h, colors[s]))
            y += row_h

    if config.legend:
        parts.extend(_legend(seq_set.alphabet, colors, _MARGIN + area_w + 12, _MARGIN + 10))
    return _document(config.width, config.height, parts)


def distribution_plot(
    dist: StateDistribution,
    alphabet: Alphabet,
    config: PlotConfig | None = None,
) -> str:
    """Stacked bands, one per state per position; bands sum to the full
    plot height."""
    config = config or PlotConfig()
    if dist.per_position.shape[1] != alphabet.size:
        raise ValidationError("distribution and alphabet disagree on the state count")
    colors = state_colors(alphabet, config)
    area_w, area_h = _plot_area(config)
    t_len = dist.per_position.shape[0]
    col_w = area_w / t_len
    parts: list[str] = []
    for t in range(t_len):
        y = _MARGIN
        for s in range(alphabet.size):
            share = float(dist.per_position[t, s])
            if share <= 0:
                continue
            band_h = share * area_h
            parts.append(_rect(_MARGIN + t * col_w, y, col_w, band_h, colors[s]))
            y += band_h
    if config.legend:
        parts.extend(_legend(alphabet, colors, _MARGIN + area_w + 12, _MARGIN + 10))
    return _document(config.width, config.height, parts)


def frequency_plot(
    freq: FrequencyTable,
    alphabet: Alphabet,
    config: PlotConfig | None = None,
) -> str:
    """Most frequent distinct sequences as horizontal color strips; strip
    height is proportional to cohort share."""
    config = config or PlotConfig()
    if not freq.entries:
        raise ValidationError("frequency table is empty")
    colors = state_colors(alphabet, config)
    area_w, area_h = _plot_area(config)
    t_len = len(freq.entries[0][0])
    cell_w = area_w / t_len
    parts: list[str] = []
    y = _MARGIN
    for states, _count, share in freq.entries:
        strip_h = share * area_h
        for t, s in enumerate(states):
            parts.append(_rect(_MARGIN + t * cell_w, y, cell_w, strip_h, colors[s]))
        y += strip_h
    if config.legend:
        parts.extend(_legend(alphabet, colors, _MARGIN + area_w + 12, _MARGIN + 10))
    return _document(config.width, config.height, parts)


def modal_plot(
    seq_set: SequenceSet,
    labels: ClusterAssignment | None = None,
    config: PlotConfig | None = None,
) -> str:
    """The typical trajectory: position-wise modal states, one strip per
    cluster (or a single strip without labels)."""
    config = config or PlotConfig()
    colors = state_colors(seq_set.alphabet, config)
    area_w, area_h = _plot_area(config)
    cell_w = area_w / seq_set.length
    parts: list[str] = []

    if labels is None:
        strips = [(None, modal_sequence(seq_set))]
    else:
        if labels.n != seq_set.n:
            raise ValidationError("labels size does not match the sequence set")
        strips = []
        for c in range(1, labels.k + 1):
            members = [seq_set.sequences[i] for i in np.flatnonzero(labels.labels == c)]
            subset = SequenceSet(
                alphabet=seq_set.alphabet,
                sequences=tuple(members),
                granularity_label=seq_set.granularity_label,
            )
            strips.append((c, modal_sequence(subset)))

    slot_h = area_h / len(strips)
    strip_h = slot_h - (_PANEL_HEADER if len(strips) > 1 else 0.0)
    y = _MARGIN
    for cluster, modal in strips:
        if cluster is not None:
            parts.append(_text(_MARGIN, y + 11, f"cluster {cluster}"))
            y += _PANEL_HEADER
        for t, s in enumerate(modal.states):
            parts.append(_rect(_MARGIN + t * cell_w, y, cell_w, strip_h, colors[s]))
        y += strip_h
    if config.legend:
        parts.extend(_legend(seq_set.alphabet, colors, _MARGIN + area_w + 12, _MARGIN + 10))
    return _document(config.width, config.height, parts)
