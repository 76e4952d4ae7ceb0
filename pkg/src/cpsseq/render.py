"""Static SVG figures: dendrogram, sequence index plot, ENA networks, HMM graphs.

Output is plain text built from fixed-precision coordinates, so the same
input always yields the same bytes.
"""

from __future__ import annotations

import math
from html import escape
from typing import Sequence

import numpy as np

from .clustering import Dendrogram, Partition
from .coding import MISSING, CodingScheme, MultichannelSequence
from .ena import EnaModel
from .hmm import HmmModel

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
    "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78", "#98df8a", "#ff9896",
    "#c5b0d5", "#c49c94", "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5",
)


def code_colors(scheme: CodingScheme) -> dict[str, str]:
    return {code: PALETTE[i % len(PALETTE)] for i, code in enumerate(scheme.codes)}


def _n(x: float) -> str:
    s = f"{x:.2f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


class _Svg:
    def __init__(self, width: float, height: float):
        self.width, self.height = width, height
        self.parts: list[str] = []

    def rect(self, x, y, w, h, fill, stroke="none"):
        self.parts.append(
            f'<rect x="{_n(x)}" y="{_n(y)}" width="{_n(w)}" height="{_n(h)}" fill="{fill}" stroke="{stroke}"/>'
        )

    def line(self, x1, y1, x2, y2, stroke="#000", width=1.0, opacity=1.0):
        op = f' stroke-opacity="{_n(opacity)}"' if opacity < 1 else ""
        self.parts.append(
            f'<line x1="{_n(x1)}" y1="{_n(y1)}" x2="{_n(x2)}" y2="{_n(y2)}" stroke="{stroke}" stroke-width="{_n(width)}"{op}/>'
        )

    def circle(self, cx, cy, r, fill, stroke="none"):
        self.parts.append(f'<circle cx="{_n(cx)}" cy="{_n(cy)}" r="{_n(r)}" fill="{fill}" stroke="{stroke}"/>')

    def path(self, d, stroke="#000", width=1.0, fill="none"):
        self.parts.append(f'<path d="{d}" stroke="{stroke}" stroke-width="{_n(width)}" fill="{fill}"/>')

    def text(self, x, y, s, size=10, anchor="start"):
        self.parts.append(
            f'<text x="{_n(x)}" y="{_n(y)}" font-family="sans-serif" font-size="{size}" text-anchor="{anchor}">{escape(str(s))}</text>'
        )

    def render(self) -> str:
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_n(self.width)}" height="{_n(self.height)}" '
            f'viewBox="0 0 {_n(self.width)} {_n(self.height)}">'
        )
        return "\n".join([head, *self.parts, "</svg>"]) + "\n"


def dendrogram_svg(dend: Dendrogram, partition: Partition | None = None) -> str:
    n = dend.n
    order = dend.leaf_order()
    pad, leaf_w, plot_h = 40, 24, 300
    svg = _Svg(2 * pad + leaf_w * n, plot_h + 2 * pad + 60)
    hmax = max(dend.heights.max(), 1e-12) if len(dend.merges) else 1.0
    y_of = lambda h: pad + plot_h * (1 - h / hmax)
    x = {leaf: pad + leaf_w * (i + 0.5) for i, leaf in enumerate(order)}
    y = {leaf: y_of(0.0) for leaf in range(n)}
    for m, (l, r, h, _) in enumerate(dend.merges):
        yh = y_of(h)
        svg.path(f"M{_n(x[l])},{_n(y[l])} V{_n(yh)} H{_n(x[r])} V{_n(y[r])}")
        x[n + m] = (x[l] + x[r]) / 2
        y[n + m] = yh
    cluster_of = partition.as_dict() if partition else {}
    for i, leaf in enumerate(order):
        label = dend.labels[leaf]
        c = cluster_of.get(label)
        if c is not None:
            svg.rect(x[leaf] - 5, y_of(0) + 4, 10, 6, PALETTE[(c - 1) % len(PALETTE)])
        svg.text(x[leaf], y_of(0) + 22, label, size=9, anchor="middle")
    svg.line(pad - 8, y_of(0), pad - 8, y_of(hmax))
    svg.text(pad - 10, y_of(hmax) + 4, _n(hmax), size=9, anchor="end")
    svg.text(pad - 10, y_of(0) + 4, "0", size=9, anchor="end")
    return svg.render()


def sequence_index_svg(
    seqs: Sequence[MultichannelSequence],
    scheme: CodingScheme,
    partition: Partition | None = None,
    cell: float = 4.0,
    row_h: float = 8.0,
) -> str:
    """One panel per (cluster, channel); a row per sequence, blank where MISSING."""
    colors = code_colors(scheme)
    cluster_of = partition.as_dict() if partition else {}
    groups: dict = {}
    for s in seqs:
        groups.setdefault(cluster_of.get(s.session_id, 1), []).append(s)
    tmax = max((len(s) for s in seqs), default=0)
    label_w, gap = 110, 14
    panel_w = label_w + cell * max(tmax, 1)
    panel_h = lambda k: row_h * len(groups[k]) + 18
    total_h = sum(panel_h(k) for k in groups) * scheme.n_channels + gap * len(groups) + 40
    width = panel_w + 20 + 140
    svg = _Svg(width, max(total_h, 40 + 16 * len(colors)))
    y = 20.0
    for k in sorted(groups):
        for ci, ch in enumerate(scheme.channels):
            svg.text(10, y + 10, f"Type {k}: {ch.name}" if partition else ch.name, size=10)
            y += 14
            for s in groups[k]:
                svg.rect(label_w, y, cell * max(len(s), 0), row_h, "none", stroke="#ddd")
                for t, code in enumerate(s.states[ci]):
                    if code is not MISSING:
                        svg.rect(label_w + cell * t, y, cell, row_h, colors[code])
                y += row_h
            y += 4
        y += gap
    lx = panel_w + 30
    for i, (code, color) in enumerate(colors.items()):
        svg.rect(lx, 20 + 16 * i, 10, 10, color)
        svg.text(lx + 14, 29 + 16 * i, code, size=10)
    return svg.render()


def ena_network_svg(model: EnaModel, cluster: int, threshold: float = 0.0, size: float = 420) -> str:
    """Codes at their loading positions, edge width proportional to weight, centroid in red."""
    pos = model.node_positions()
    pts = np.vstack([pos, model.points, *[c[None, :] for c in model.centroids.values()]])
    span = float(np.abs(pts).max()) or 1.0
    pad = 40
    scale = (size / 2 - pad) / span
    to_xy = lambda p: (size / 2 + scale * p[0], size / 2 - scale * p[1])
    svg = _Svg(size, size + 20)
    svg.line(pad / 2, size / 2, size - pad / 2, size / 2, stroke="#ccc")
    svg.line(size / 2, pad / 2, size / 2, size - pad / 2, stroke="#ccc")
    weights = model.edges[cluster]
    index = {c: i for i, c in enumerate(model.codes)}
    for p, (a, b) in enumerate(model.pairs):
        w = float(weights[p])
        if w <= threshold:
            continue
        x1, y1 = to_xy(pos[index[a]])
        x2, y2 = to_xy(pos[index[b]])
        svg.line(x1, y1, x2, y2, stroke="#4060a0", width=0.5 + 8 * w, opacity=0.3 + 0.7 * w)
    for c, i in index.items():
        x, y = to_xy(pos[i])
        svg.circle(x, y, 5, "#222")
        svg.text(x + 7, y - 5, c, size=10)
    cx, cy = to_xy(model.centroids[cluster])
    svg.circle(cx, cy, 6, "#d62728", stroke="#000")
    svg.text(10, size + 12, f"Type {cluster} (window {model.window})", size=11)
    return svg.render()


def hmm_graph_svg(model: HmmModel, scheme: CodingScheme, title: str = "", min_prob: float = 0.05) -> str:
    """States on a circle with per-state emission bars; arrows for transitions above ``min_prob``."""
    S = model.n_states
    colors = code_colors(scheme)
    size = 520
    R = 170
    center = size / 2
    svg = _Svg(size, size + 30)
    xy = [
        (center + R * math.cos(2 * math.pi * s / S - math.pi / 2), center + R * math.sin(2 * math.pi * s / S - math.pi / 2))
        for s in range(S)
    ]
    for i in range(S):
        for j in range(S):
            p = float(model.transition[i, j])
            if i == j or p < min_prob:
                continue
            (x1, y1), (x2, y2) = xy[i], xy[j]
            mx, my = (x1 + x2) / 2 + (y2 - y1) * 0.15, (y1 + y2) / 2 - (x2 - x1) * 0.15
            svg.path(f"M{_n(x1)},{_n(y1)} Q{_n(mx)},{_n(my)} {_n(x2)},{_n(y2)}", stroke="#777", width=0.5 + 6 * p)
            svg.text(mx, my, _n(p), size=8, anchor="middle")
    bar_w, bar_h = 60, 40
    for s, (x, y) in enumerate(xy):
        svg.circle(x, y, 36, "#fff", stroke="#333")
        # stacked bar per channel: code shares of the emission row
        for ci, ch in enumerate(scheme.channels):
            bx = x - bar_w / 2
            by = y - bar_h / 2 + ci * bar_h / scheme.n_channels
            h = bar_h / scheme.n_channels - 1
            off = 0.0
            for k, code in enumerate(ch.codes):
                w = bar_w * float(model.emission[ci][s, k])
                if w > 0:
                    svg.rect(bx + off, by, w, h, colors[code])
                off += w
        svg.text(x, y + bar_h / 2 + 12, f"State {s + 1} ({_n(model.transition[s, s])})", size=9, anchor="middle")
    svg.text(10, size + 20, title, size=11)
    return svg.render()
