"""Text and SVG renderings of TNCE results."""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from .energetics import DB_CEIL, DB_FLOOR, GridReport
from .filterbank import BAND_LABELS
from .store import profiles_csv

CELL = 14
GAP = 18
MARGIN = 40


def db_color(db, floor=DB_FLOOR, ceil=DB_CEIL) -> str:
    """White at the floor, black at 0 dB, red at the ceiling, linear in between."""
    v = float(np.clip(db, floor, ceil))
    if v <= 0:
        g = round(255 * v / floor) if floor else 0
        return f"#{g:02x}{g:02x}{g:02x}"
    r = round(255 * v / ceil) if ceil else 0
    return f"#{r:02x}0000"


def band_name(label) -> str:
    return f"{label / 1000:g} kHz"


def grid_svg(rep: GridReport) -> str:
    """Layers left to right, bands top to bottom; "M" marks the microphone, "+" missing data."""
    sizes = [nd.shape[0] for nd in rep.no_data]
    widths = [n * CELL for n in sizes]
    block_h = max(widths)
    W = MARGIN + sum(widths) + GAP * (len(sizes) - 1) + 10
    H = MARGIN + len(rep.labels) * (block_h + GAP) + 10
    clamped = rep.clamped()
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="10">',
           f'<rect width="{W}" height="{H}" fill="#dddddd"/>']
    x = MARGIN
    for li, w in enumerate(widths):
        out.append(f'<text x="{x + w / 2:.1f}" y="{MARGIN - 22}" text-anchor="middle">layer {li}</text>')
        x += w + GAP
    for bi, label in enumerate(rep.labels):
        y0 = MARGIN + bi * (block_h + GAP)
        out.append(f'<text x="4" y="{y0 + block_h / 2:.1f}">{band_name(label)}</text>')
        x0 = MARGIN
        for li, n in enumerate(sizes):
            for r in range(n):
                for c in range(n):
                    cx, cy = x0 + c * CELL, y0 + r * CELL
                    is_mic = rep.mic_cell == (li, r, c)
                    if is_mic:
                        out.append(f'<rect x="{cx}" y="{cy}" width="{CELL}" height="{CELL}" fill="#ffffff" stroke="#888888"/>')
                        out.append(f'<text x="{cx + CELL / 2}" y="{cy + CELL - 3}" text-anchor="middle" class="mic">M</text>')
                    elif rep.no_data[li][r, c]:
                        out.append(f'<rect x="{cx}" y="{cy}" width="{CELL}" height="{CELL}" fill="#ffffff" stroke="#888888"/>')
                        out.append(f'<text x="{cx + CELL / 2}" y="{cy + CELL - 3}" text-anchor="middle" class="nodata">+</text>')
                    else:
                        v = clamped[li][bi, r, c]
                        out.append(f'<rect x="{cx}" y="{cy}" width="{CELL}" height="{CELL}" '
                                   f'fill="{db_color(v, rep.floor, rep.ceil)}" data-db="{v:.2f}"/>')
            x0 += n * CELL + GAP
    out.append("</svg>")
    return "\n".join(out) + "\n"


def filterbank_svg(fb, width=600, height=200) -> str:
    f = fb.freqs
    sel = f > 0
    lf = np.log10(f[sel])
    xs = (lf - lf.min()) / (lf.max() - lf.min()) * (width - 20) + 10
    colors = ("#1f77b4", "#ff7f0e", "#d62728", "#9467bd", "#2ca02c")
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">']
    step = max(1, len(xs) // 2000)
    for g, col in zip(fb.gains, colors):
        ys = height - 10 - g[sel] * (height - 20)
        pts = " ".join(f"{x:.1f},{y:.1f}" for x, y in zip(xs[::step], ys[::step]))
        out.append(f'<polyline fill="none" stroke="{col}" points="{pts}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def tnce_csv(profiles: dict) -> str:
    return profiles_csv(profiles)


def tnce_json(profiles: dict) -> str:
    return json.dumps({k: {"bands": [float(x) for x in v], "total": float(np.sum(v))}
                       for k, v in sorted(profiles.items())}, indent=1)


def compare_csv(rows, p=90.0, decimals: int | None = None) -> str:
    """Rows of :func:`echopanel.workflow.compare_table`; full precision unless ``decimals`` is given."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    pct = f"{p:g}%"
    w.writerow(["panel"] + [f"{band_name(b)} {pct}" for b in BAND_LABELS] + [f"Total {pct}"])
    for r in rows:
        vals = list(r["bands_db"]) + [r["total_db"]]
        fmt = (lambda x: repr(float(x))) if decimals is None else (lambda x: f"{x:.{decimals}f}")
        w.writerow([r["panel"]] + [fmt(x) for x in vals])
    return buf.getvalue()
