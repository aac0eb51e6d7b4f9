"""Standalone HTML transcript export with inline SVG charts.

Everything is self-contained (inline styles, inline SVG, no external
references) so a saved transcript behaves like a printed notebook page.
"""

from __future__ import annotations

import html
_COLORS = ("#2563eb", "#9333ea", "#059669", "#d97706")


def _scale(values: list[float], lo: float, hi: float, out_lo: float, out_hi: float) -> list[float]:
    span = (hi - lo) or 1.0
    return [out_lo + (v - lo) / span * (out_hi - out_lo) for v in values]


def svg_bar(chart: dict, width: int = 480, height: int = 260) -> str:
    series = chart.get("series") or []
    if not series:
        return "<svg></svg>"
    s = series[0]
    xs = [str(x) for x in s["x"]]
    ys = [float(v) for v in s["y"]]
    top, bottom, left = 30, height - 40, 50
    y_max = max(ys + [0.0]) or 1.0
    n = len(ys)
    slot = (width - left - 20) / max(n, 1)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" role="img">',
        f'<text x="{width/2:.0f}" y="18" text-anchor="middle" font-size="13" font-weight="bold">{html.escape(chart.get("title", ""))}</text>',
        f'<line x1="{left}" y1="{bottom}" x2="{width-20}" y2="{bottom}" stroke="#555"/>',
    ]
    for i, (label, v) in enumerate(zip(xs, ys)):
        bar_h = (v / y_max) * (bottom - top)
        x = left + i * slot + slot * 0.15
        parts.append(
            f'<rect x="{x:.1f}" y="{bottom-bar_h:.1f}" width="{slot*0.7:.1f}" '
            f'height="{bar_h:.1f}" fill="{_COLORS[0]}"/>'
        )
        parts.append(
            f'<text x="{x+slot*0.35:.1f}" y="{bottom+14}" text-anchor="middle" font-size="10">{html.escape(label)}</text>'
        )
        parts.append(
            f'<text x="{x+slot*0.35:.1f}" y="{bottom-bar_h-4:.1f}" text-anchor="middle" font-size="9">{v:.3g}</text>'
        )
    parts.append("</svg>")
    return "".join(parts)


def svg_line(chart: dict, width: int = 480, height: int = 260) -> str:
    series = chart.get("series") or []
    if not series:
        return "<svg></svg>"
    top, bottom, left, right = 30, height - 40, 50, width - 20
    all_x: list[float] = []
    all_y: list[float] = []
    for s in series:
        try:
            all_x.extend(float(v) for v in s["x"])
        except (TypeError, ValueError):
            all_x.extend(range(len(s["x"])))
        ys = [float(v) for v in s["y"]]
        all_y.extend(ys)
        for err, y in zip(s.get("y_error") or [], ys):
            all_y.extend([y - err, y + err])
    x_lo, x_hi = min(all_x), max(all_x)
    y_lo, y_hi = min(all_y + [0.0]), max(all_y)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" role="img">',
        f'<text x="{width/2:.0f}" y="18" text-anchor="middle" font-size="13" font-weight="bold">{html.escape(chart.get("title", ""))}</text>',
        f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="#555"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="#555"/>',
    ]
    for si, s in enumerate(series):
        color = _COLORS[si % len(_COLORS)]
        try:
            xs = [float(v) for v in s["x"]]
        except (TypeError, ValueError):
            xs = list(range(len(s["x"])))
        ys = [float(v) for v in s["y"]]
        px = _scale(xs, x_lo, x_hi, left, right)
        py = _scale(ys, y_lo, y_hi, bottom, top)
        points = " ".join(f"{x:.1f},{y:.1f}" for x, y in zip(px, py))
        parts.append(f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="2"/>')
        for err, (x, y, raw) in zip(s.get("y_error") or [], zip(px, py, ys)):
            lo_p = _scale([raw - err], y_lo, y_hi, bottom, top)[0]
            hi_p = _scale([raw + err], y_lo, y_hi, bottom, top)[0]
            parts.append(f'<line x1="{x:.1f}" y1="{lo_p:.1f}" x2="{x:.1f}" y2="{hi_p:.1f}" stroke="{color}" stroke-width="1"/>')
        for x, y in zip(px, py):
            parts.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="3" fill="{color}"/>')
        parts.append(
            f'<text x="{right-6}" y="{top+14*si+4}" text-anchor="end" font-size="10" fill="{color}">{html.escape(s.get("label", ""))}</text>'
        )
    parts.append("</svg>")
    return "".join(parts)


def _tree_leaves(node: dict) -> int:
    children = node.get("children") or []
    if not children:
        return 1
    return sum(_tree_leaves(c) for c in children)


def _tree_depth(node: dict) -> int:
    children = node.get("children") or []
    if not children:
        return 1
    return 1 + max(_tree_depth(c) for c in children)


def svg_tree(chart: dict, width: int = 560) -> str:
    root = chart.get("tree")
    if not root:
        return "<svg></svg>"
    depth = _tree_depth(root)
    leaves = _tree_leaves(root)
    level_h, box_w, box_h = 80, 150, 34
    height = depth * level_h + 50
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" role="img">',
        f'<text x="{width/2:.0f}" y="18" text-anchor="middle" font-size="13" font-weight="bold">{html.escape(chart.get("title", ""))}</text>',
    ]

    def place(node: dict, x_lo: float, x_hi: float, level: int) -> tuple[float, float]:
        x = (x_lo + x_hi) / 2
        y = 40 + level * level_h
        children = node.get("children") or []
        span = x_hi - x_lo
        offset = x_lo
        for child in children:
            share = span * _tree_leaves(child) / _tree_leaves(node)
            cx, cy = place(child, offset, offset + share, level + 1)
            offset += share
            parts.append(f'<line x1="{x:.1f}" y1="{y+box_h/2:.1f}" x2="{cx:.1f}" y2="{cy-box_h/2:.1f}" stroke="#888"/>')
            if child.get("edge"):
                parts.append(
                    f'<text x="{(x+cx)/2:.1f}" y="{(y+cy)/2:.1f}" text-anchor="middle" font-size="10" fill="#555">{html.escape(child["edge"])}</text>'
                )
        is_leaf = not children
        fill = "#dcfce7" if is_leaf else "#e0e7ff"
        parts.append(
            f'<rect x="{x-box_w/2:.1f}" y="{y-box_h/2:.1f}" width="{box_w}" height="{box_h}" rx="6" fill="{fill}" stroke="#666"/>'
        )
        label = html.escape(str(node.get("label", "")))
        parts.append(f'<text x="{x:.1f}" y="{y+4:.1f}" text-anchor="middle" font-size="10">{label}</text>')
        return x, y

    place(root, 10, width - 10, 0)
    parts.append("</svg>")
    return "".join(parts)


def render_chart(chart: dict) -> str:
    kind = chart.get("kind")
    if kind == "bar":
        return svg_bar(chart)
    if kind == "line":
        return svg_line(chart)
    if kind == "tree":
        return svg_tree(chart)
    return ""


_PAGE = """<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>{title}</title>
<style>
body {{ font-family: system-ui, sans-serif; max-width: 760px; margin: 2rem auto; color: #111; }}
h1 {{ font-size: 1.3rem; }}
.msg {{ margin: 0.6rem 0; padding: 0.6rem 0.9rem; border-radius: 12px; white-space: pre-wrap; }}
.user {{ background: #2563eb; color: white; margin-left: 20%; }}
.agent {{ background: #f1f5f9; margin-right: 20%; }}
.meta {{ color: #666; font-size: 0.8rem; margin: 1rem 0 0.2rem; }}
.chart {{ margin: 0.4rem 0; }}
</style>
</head>
<body>
<h1>{title}</h1>
{body}
</body>
</html>
"""


def render_transcript_html(events: list[dict], title: str = "Conversation transcript") -> str:
    """Render an event log (dicts with type/payload) into standalone HTML."""
    blocks: list[str] = []
    for event in events:
        etype = event.get("type")
        payload = event.get("payload", {})
        if etype == "user_message":
            blocks.append(f'<div class="msg user">{html.escape(payload.get("text", ""))}</div>')
        elif etype == "agent_message":
            blocks.append(f'<div class="msg agent">{html.escape(payload.get("text", ""))}</div>')
            for chart in payload.get("charts", []) or []:
                blocks.append(f'<div class="chart">{render_chart(chart)}</div>')
        elif etype == "tool_started":
            blocks.append(
                f'<div class="meta">running {html.escape(str(payload.get("tool", "")))} '
                f'({html.escape(str(payload.get("job", "")))})</div>'
            )
        elif etype == "tool_result":
            blocks.append(f'<div class="msg agent">{html.escape(payload.get("reply", ""))}</div>')
            for chart in payload.get("charts", []) or []:
                blocks.append(f'<div class="chart">{render_chart(chart)}</div>')
        elif etype == "error":
            blocks.append(f'<div class="meta">error: {html.escape(str(payload.get("message", "")))}</div>')
    return _PAGE.format(title=html.escape(title), body="\n".join(blocks))
