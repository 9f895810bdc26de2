"""Tiny deterministic SVG writers for report charts.

Hand-rolled on purpose: output bytes depend only on the input numbers, which
keeps repeated runs diffable. Layout is utilitarian, not publication-grade.
"""
from __future__ import annotations

from pathlib import Path


def _fmt(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


def _write(path, width: int, height: int, body: list[str]) -> None:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
    )
    Path(path).write_text(
        "\n".join([head, '<rect width="100%" height="100%" fill="white"/>'] + body + ["</svg>"])
        + "\n",
        encoding="utf-8",
    )


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def bar_chart_svg(path, labels, values, title: str = "", x_label: str = "") -> None:
    """Horizontal bar chart, one row per label, widths proportional to value."""
    bar_h, gap, left, top = 16, 6, 220, 40
    plot_w = 480
    vmax = max(max(values), 1e-300)
    height = top + len(labels) * (bar_h + gap) + 40
    body = [f'<text x="{left}" y="20" font-size="14" font-family="monospace">{_esc(title)}</text>']
    for i, (label, value) in enumerate(zip(labels, values)):
        y = top + i * (bar_h + gap)
        w = plot_w * value / vmax
        body.append(
            f'<text x="{left - 8}" y="{y + 12}" font-size="11" font-family="monospace" '
            f'text-anchor="end">{_esc(str(label))}</text>'
        )
        body.append(
            f'<rect x="{left}" y="{y}" width="{_fmt(w)}" height="{bar_h}" fill="#4878b0"/>'
        )
        body.append(
            f'<text x="{left + 4 + float(_fmt(w))}" y="{y + 12}" font-size="10" '
            f'font-family="monospace">{value:.4g}</text>'
        )
    body.append(
        f'<text x="{left}" y="{height - 12}" font-size="11" '
        f'font-family="monospace">{_esc(x_label)}</text>'
    )
    _write(path, left + plot_w + 100, height, body)


def boxplot_svg(path, five_numbers: dict, title: str = "") -> None:
    """One horizontal box-and-whisker from min/q1/median/q3/max (in minutes)."""
    left, width, mid_y = 60, 600, 90
    lo, hi = five_numbers["min"], five_numbers["max"]
    span = max(hi - lo, 1e-300)

    def sx(v: float) -> float:
        return left + width * (v - lo) / span

    q1, med, q3 = five_numbers["q1"], five_numbers["median"], five_numbers["q3"]
    body = [
        f'<text x="{left}" y="24" font-size="14" font-family="monospace">{_esc(title)}</text>',
        f'<line x1="{_fmt(sx(lo))}" y1="{mid_y}" x2="{_fmt(sx(q1))}" y2="{mid_y}" stroke="black"/>',
        f'<line x1="{_fmt(sx(q3))}" y1="{mid_y}" x2="{_fmt(sx(hi))}" y2="{mid_y}" stroke="black"/>',
        f'<rect x="{_fmt(sx(q1))}" y="{mid_y - 25}" width="{_fmt(sx(q3) - sx(q1))}" height="50" '
        'fill="#cfe0f0" stroke="black"/>',
        f'<line x1="{_fmt(sx(med))}" y1="{mid_y - 25}" x2="{_fmt(sx(med))}" y2="{mid_y + 25}" '
        'stroke="green" stroke-width="2"/>',
    ]
    for v in (lo, hi):
        body.append(
            f'<line x1="{_fmt(sx(v))}" y1="{mid_y - 12}" x2="{_fmt(sx(v))}" y2="{mid_y + 12}" '
            'stroke="black"/>'
        )
    for v in (lo, q1, med, q3, hi):
        body.append(
            f'<text x="{_fmt(sx(v))}" y="{mid_y + 45}" font-size="10" font-family="monospace" '
            f'text-anchor="middle">{v:.4g}</text>'
        )
    _write(path, left + width + 60, 160, body)


def heatmap_svg(path, matrix, labels, title: str = "") -> None:
    """Correlation heatmap: blue (-1) through white (0) to red (+1)."""
    cell, left, top = 18, 170, 60
    n = len(labels)

    def color(r: float) -> str:
        r = max(-1.0, min(1.0, r))
        if r >= 0:
            g = int(round(255 * (1 - r)))
            return f"rgb(255,{g},{g})"
        g = int(round(255 * (1 + r)))
        return f"rgb({g},{g},255)"

    body = [f'<text x="{left}" y="24" font-size="14" font-family="monospace">{_esc(title)}</text>']
    for i, label in enumerate(labels):
        body.append(
            f'<text x="{left - 6}" y="{top + i * cell + 13}" font-size="9" '
            f'font-family="monospace" text-anchor="end">{_esc(str(label))}</text>'
        )
        body.append(
            f'<text x="{left + i * cell + 9}" y="{top - 6}" font-size="9" '
            f'font-family="monospace" text-anchor="start" '
            f'transform="rotate(-60 {left + i * cell + 9} {top - 6})">{_esc(str(label))}</text>'
        )
    for i in range(n):
        for j in range(n):
            body.append(
                f'<rect x="{left + j * cell}" y="{top + i * cell}" width="{cell}" '
                f'height="{cell}" fill="{color(float(matrix[i][j]))}" stroke="#ddd"/>'
            )
    size = max(left + n * cell + 40, 420)
    _write(path, size, top + n * cell + 40, body)
