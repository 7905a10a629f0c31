"""Grouped-bar summary figure rendered as hand-assembled SVG.

No plotting library: the byte-for-byte output must be a pure function of
the aggregated numbers, so the markup is emitted directly with fixed
coordinate formatting.
"""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

from .errors import EmptyReports
from .pipeline import Aggregate

PALETTE = (
    "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860",
    "#da8bc3", "#8c8c8c", "#ccb974", "#64b5cd", "#2f4b7c", "#ffa600",
    "#a05195", "#f95d6a", "#003f5c", "#665191",
)

_PANEL_W = 960.0
_PANEL_H = 230.0
_MARGIN_L = 70.0
_MARGIN_R = 20.0
_TOP = 40.0
_PANEL_GAP = 70.0
_LEGEND_ROW_H = 18.0


def _num(x: float) -> str:
    return f"{x:.2f}"


def _color(i: int) -> str:
    return PALETTE[i % len(PALETTE)]


def _panel(agg: Aggregate, metric_index: int, title: str, y_top: float) -> list[str]:
    rois = agg.rois
    labels = agg.labels
    values = {}
    vmax = 0.0
    for roi in rois:
        for label in labels:
            pair = agg.per_roi[roi].get(label)
            if pair is None:
                continue
            values[(roi, label)] = pair[metric_index]
            vmax = max(vmax, abs(pair[metric_index]))
    vmax = max(vmax, 1e-9)
    scale = _PANEL_H / (vmax * 1.1)

    out = [
        f'<text x="{_num(_MARGIN_L)}" y="{_num(y_top - 8)}" font-size="14" '
        f'font-family="monospace">{escape(title)}</text>'
    ]
    baseline = y_top + _PANEL_H
    out.append(
        f'<line x1="{_num(_MARGIN_L)}" y1="{_num(baseline)}" '
        f'x2="{_num(_MARGIN_L + _PANEL_W)}" y2="{_num(baseline)}" '
        'stroke="#333333" stroke-width="1"/>'
    )
    out.append(
        f'<line x1="{_num(_MARGIN_L)}" y1="{_num(y_top)}" '
        f'x2="{_num(_MARGIN_L)}" y2="{_num(baseline)}" '
        'stroke="#333333" stroke-width="1"/>'
    )
    for frac in (0.25, 0.5, 0.75, 1.0):
        val = vmax * frac
        y = baseline - val * scale
        out.append(
            f'<line x1="{_num(_MARGIN_L - 4)}" y1="{_num(y)}" x2="{_num(_MARGIN_L)}" '
            f'y2="{_num(y)}" stroke="#333333" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{_num(_MARGIN_L - 8)}" y="{_num(y + 4)}" font-size="10" '
            f'font-family="monospace" text-anchor="end">{val:.3f}</text>'
        )

    group_w = _PANEL_W / max(1, len(rois))
    bar_w = group_w * 0.85 / max(1, len(labels))
    for gi, roi in enumerate(rois):
        gx = _MARGIN_L + gi * group_w
        for li, label in enumerate(labels):
            if (roi, label) not in values:
                continue
            val = values[(roi, label)]
            h = abs(val) * scale
            x = gx + group_w * 0.075 + li * bar_w
            out.append(
                f'<rect x="{_num(x)}" y="{_num(baseline - h)}" width="{_num(bar_w)}" '
                f'height="{_num(h)}" fill="{_color(li)}">'
                f'<title>{escape(f"{roi} / {label}: {val:.4f}")}</title></rect>'
            )
        out.append(
            f'<text x="{_num(gx + group_w / 2)}" y="{_num(baseline + 16)}" font-size="11" '
            f'font-family="monospace" text-anchor="middle">{escape(roi)}</text>'
        )
    return out


def render_summary_svg(agg: Aggregate) -> str:
    """Two stacked panels (2v2 accuracy, then Pearson) as an SVG document."""
    if not agg.labels or not agg.rois:
        raise EmptyReports("nothing to plot")
    legend_h = _LEGEND_ROW_H * len(agg.labels) + 10
    total_h = _TOP + 2 * (_PANEL_H + _PANEL_GAP) + legend_h
    total_w = _MARGIN_L + _PANEL_W + _MARGIN_R
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_num(total_w)}" '
        f'height="{_num(total_h)}" viewBox="0 0 {_num(total_w)} {_num(total_h)}">',
        f'<rect x="0" y="0" width="{_num(total_w)}" height="{_num(total_h)}" fill="#ffffff"/>',
    ]
    parts.extend(_panel(agg, 1, "2v2 accuracy by ROI", _TOP))
    parts.extend(_panel(agg, 0, "Pearson correlation by ROI", _TOP + _PANEL_H + _PANEL_GAP))
    ly = _TOP + 2 * (_PANEL_H + _PANEL_GAP)
    for li, label in enumerate(agg.labels):
        y = ly + li * _LEGEND_ROW_H
        parts.append(
            f'<rect x="{_num(_MARGIN_L)}" y="{_num(y)}" width="12.00" height="12.00" '
            f'fill="{_color(li)}"/>'
        )
        parts.append(
            f'<text x="{_num(_MARGIN_L + 18)}" y="{_num(y + 10)}" font-size="11" '
            f'font-family="monospace">{escape(label)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_summary_svg(path, agg: Aggregate) -> None:
    Path(path).write_text(render_summary_svg(agg))
