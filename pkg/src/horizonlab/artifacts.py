"""Deterministic artifact writers: CSV, JSON, and plain-polyline SVG.

Identical inputs must produce byte-identical files, so everything here uses
fixed formatting (17 significant digits for floats — round-trip exact for
IEEE doubles), fixed field orders, and no timestamps.
"""

import json
import math

import numpy as np

from .errors import ParameterError

CRLF = "\r\n"


def fmt_float(x):
    """Shortest 17-significant-digit decimal; round-trips an IEEE double."""
    return f"{float(x):.17g}"


def _csv_field(v):
    if isinstance(v, str):
        s = v
    elif isinstance(v, (bool, np.bool_)):
        s = "true" if v else "false"
    elif isinstance(v, (int, np.integer)):
        s = str(int(v))
    else:
        s = fmt_float(v)
    if any(ch in s for ch in (',', '"', '\r', '\n')):
        s = '"' + s.replace('"', '""') + '"'
    return s


def csv_text(header, rows):
    """RFC-4180 text: comma separator, CRLF line endings, quoted as needed."""
    lines = [",".join(_csv_field(h) for h in header)]
    for row in rows:
        lines.append(",".join(_csv_field(v) for v in row))
    return CRLF.join(lines) + CRLF


def write_csv(path, header, rows):
    text = csv_text(header, rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v) or math.isinf(v):
            return repr(v)  # JSON has no non-finite numbers; keep it readable
        return v
    return obj


def json_text(obj):
    """UTF-8 JSON with stable key order (insertion order of the payload)."""
    return json.dumps(_jsonable(obj), indent=2, ensure_ascii=False) + "\n"


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(json_text(obj))
    return path


_SVG_PALETTE = ("#1f3a5f", "#a23b3b", "#3b7a57", "#7a5c3b", "#5f3a8f", "#3b6d7a")


def svg_text(curves, size=640, margin=0.06, stroke_width=1.5):
    """SVG 1.1 document drawing each curve as one polyline path.

    ``curves`` is a list of (k, 2) arrays in data coordinates (same scale on
    both axes; the y axis is flipped to screen orientation).  No text, no
    axes — the artifact is the curve geometry itself.
    """
    arrs = [np.asarray(c, dtype=float) for c in curves]
    if not arrs or any(a.ndim != 2 or a.shape[1] != 2 or len(a) < 2 for a in arrs):
        raise ParameterError("svg_text needs a list of (k >= 2, 2) coordinate arrays")
    allpts = np.vstack(arrs)
    lo = allpts.min(axis=0)
    hi = allpts.max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-30))
    pad = margin * span
    scale = size / (span + 2.0 * pad)

    def to_screen(p):
        x = (p[:, 0] - lo[0] + pad) * scale
        y = size - (p[:, 1] - lo[1] + pad) * scale
        return x, y

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    for i, arr in enumerate(arrs):
        x, y = to_screen(arr)
        d = "M " + " L ".join(f"{xi:.3f} {yi:.3f}" for xi, yi in zip(x, y))
        color = _SVG_PALETTE[i % len(_SVG_PALETTE)]
        parts.append(
            f'<path d="{d}" fill="none" stroke="{color}" '
            f'stroke-width="{stroke_width}"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(path, curves, **kwargs):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(svg_text(curves, **kwargs))
    return path
