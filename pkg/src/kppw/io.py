"""CSV/JSON/SVG writers with fixed 15-significant-digit formatting."""
from __future__ import annotations

import csv
import enum
import json
from fractions import Fraction
from pathlib import Path

import numpy as np

DIGITS = 15


def fmt(x) -> str:
    return format(float(x), f".{DIGITS}g")


def _clean(obj):
    """Make ``obj`` JSON-serializable with floats rounded to 15 significant digits."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not np.isfinite(x):
            return repr(x)
        return float(fmt(x))
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, enum.Enum):
        return obj.value
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def write_csv(path, header, columns) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = [np.asarray(c, dtype=float) for c in columns]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([fmt(x) for x in row])
    return path


def write_svg(path, x, ys, labels=(), title="", width=640, height=400) -> Path:
    """Minimal line plot; a convenience output, never read back."""
    path = Path(path)
    x = np.asarray(x, dtype=float)
    ys = [np.asarray(y, dtype=float) for y in ys]
    pad = 40
    lo = min(float(np.min(y)) for y in ys)
    hi = max(float(np.max(y)) for y in ys)
    if hi == lo:
        hi, lo = hi + 1, lo - 1

    def px(v):
        return pad + (v - x[0]) / (x[-1] - x[0]) * (width - 2 * pad)

    def py(v):
        return height - pad - (v - lo) / (hi - lo) * (height - 2 * pad)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<text x="{pad}" y="20" font-size="14">{title}</text>',
             f'<line x1="{pad}" y1="{py(0) if lo < 0 < hi else height - pad:.1f}" '
             f'x2="{width - pad}" y2="{py(0) if lo < 0 < hi else height - pad:.1f}" stroke="#999"/>']
    for i, y in enumerate(ys):
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        c = colors[i % len(colors)]
        parts.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.2" points="{pts}"/>')
        if i < len(labels):
            parts.append(f'<text x="{width - pad - 120}" y="{30 + 16 * i}" fill="{c}" '
                         f'font-size="12">{labels[i]}</text>')
    parts.append(f'<text x="{pad}" y="{height - 10}" font-size="11">[{fmt(lo)}, {fmt(hi)}]</text>')
    parts.append("</svg>\n")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(parts))
    return path
