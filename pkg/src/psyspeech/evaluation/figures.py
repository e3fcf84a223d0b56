"""Standalone SVG renderings: ROC curves, attention traces, emotion
timelines and label heatmaps.  Output is plain text with fixed number
formatting so identical inputs give identical bytes."""

from xml.sax.saxutils import escape

from ..io import atomic_write_text

SVG_HEADER = '<?xml version="1.0" encoding="UTF-8"?>\n'
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
EMOTION_COLORS = {
    "neutral": "#ffffff",
    "anger": "#d62728",
    "fear": "#9467bd",
    "joy": "#ffd700",
    "sadness": "#1f77b4",
}


def _f(x):
    return f"{float(x):.4f}"


def _svg(width, height, body):
    return (SVG_HEADER + f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n' + "\n".join(body) + "\n</svg>\n")


def roc_svg(curves, title=""):
    """``curves`` is a list of ``(label, fpr, tpr, auc)``."""
    size, pad = 320, 40
    body = [f'<rect x="{pad}" y="{pad}" width="{size}" height="{size}" fill="none" stroke="#000"/>',
            f'<line x1="{pad}" y1="{pad + size}" x2="{pad + size}" y2="{pad}" stroke="#aaa" stroke-dasharray="4 4"/>',
            f'<text x="{pad + size / 2}" y="{pad - 12}" text-anchor="middle" font-size="14">{escape(title)}</text>',
            f'<text x="{pad + size / 2}" y="{pad + size + 30}" text-anchor="middle" font-size="12">False positive rate</text>',
            f'<text x="12" y="{pad + size / 2}" font-size="12" transform="rotate(-90 12 {pad + size / 2})" '
            f'text-anchor="middle">True positive rate</text>']
    for i, (label, fpr, tpr, auc) in enumerate(curves):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_f(pad + size * x)},{_f(pad + size * (1 - y))}" for x, y in zip(fpr, tpr))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        body.append(f'<text x="{pad + size - 150}" y="{pad + size - 12 - 16 * i}" font-size="12" '
                    f'fill="{color}">{escape(label)} (AUC {auc:.3f})</text>')
    return _svg(size + 2 * pad, size + 2 * pad, body)


def attention_svg(rows, title=""):
    """``rows`` is a list of ``(segment_text, weight)``; the highlight
    opacity is each weight divided by the largest weight."""
    top = max((w for _, w in rows), default=0.0) or 1.0
    line_h, width = 22, 760
    body = [f'<text x="10" y="20" font-size="14">{escape(title)}</text>']
    for i, (text, w) in enumerate(rows):
        y = 30 + i * line_h
        body.append(f'<rect x="10" y="{y}" width="{width - 20}" height="{line_h - 2}" fill="#d62728" '
                    f'fill-opacity="{_f(w / top)}"/>')
        body.append(f'<text x="14" y="{y + 15}" font-size="12">{escape(text)} [{w:.3f}]</text>')
    return _svg(width, 40 + line_h * len(rows), body)


def timeline_svg(rows, title=""):
    """``rows`` is a list of ``(start_s, duration_s, emotion)``; one coloured
    bar per segment, neutral drawn white."""
    total = max((s + d for s, d, _ in rows), default=0.0) or 1.0
    width, height = 760, 60
    body = [f'<text x="10" y="16" font-size="14">{escape(title)}</text>']
    for start, dur, emo in rows:
        x = 10 + (width - 20) * start / total
        w = (width - 20) * dur / total
        color = EMOTION_COLORS.get(emo, "#cccccc")
        body.append(f'<rect x="{_f(x)}" y="24" width="{_f(w)}" height="28" fill="{color}" stroke="#000" '
                    f'stroke-width="0.5"><title>{escape(emo)}</title></rect>')
    return _svg(width, height, body)


def heatmap_svg(row_names, col_names, matrix, title=""):
    cell, left, top = 44, 150, 60
    peak = max((v for r in matrix for v in r), default=0) or 1
    body = [f'<text x="10" y="20" font-size="14">{escape(title)}</text>']
    for j, c in enumerate(col_names):
        body.append(f'<text x="{left + j * cell + cell / 2}" y="{top - 8}" font-size="10" '
                    f'text-anchor="middle">{escape(str(c))}</text>')
    for i, r in enumerate(row_names):
        y = top + i * cell
        body.append(f'<text x="{left - 6}" y="{y + cell / 2 + 4}" font-size="11" text-anchor="end">{escape(r)}</text>')
        for j, v in enumerate(matrix[i]):
            body.append(f'<rect x="{left + j * cell}" y="{y}" width="{cell}" height="{cell}" fill="#1f77b4" '
                        f'fill-opacity="{_f(v / peak)}" stroke="#fff"/>')
            body.append(f'<text x="{left + j * cell + cell / 2}" y="{y + cell / 2 + 4}" font-size="10" '
                        f'text-anchor="middle">{int(v)}</text>')
    return _svg(left + cell * len(col_names) + 10, top + cell * len(row_names) + 10, body)


def write_svg(path, text):
    atomic_write_text(path, text)
