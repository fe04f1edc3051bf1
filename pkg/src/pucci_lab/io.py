"""Field and table output: CSV (x, y, value), binary PGM and SVG heatmaps."""

from __future__ import annotations

import csv
import hashlib
import io
from pathlib import Path

import numpy as np

from .grid import ScalarField

# viridis-like ramp, sampled at nine equally spaced stops
_RAMP = np.array([
    (68, 1, 84), (71, 44, 122), (59, 81, 139), (44, 113, 142), (33, 144, 141),
    (39, 173, 129), (92, 200, 99), (170, 220, 50), (253, 231, 37),
], dtype=float)


def field_rows(field: ScalarField):
    """(x, y, value) for every active node, row-major in (y, x)."""
    g = field.grid
    mask = g.active
    return zip(g.X[mask], g.Y[mask], field.values[mask])


def field_csv(field: ScalarField) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "value"])
    for x, y, v in field_rows(field):
        w.writerow([repr(float(x)), repr(float(y)), repr(float(v))])
    return buf.getvalue()


def table_csv(rows: list[dict], columns=None) -> str:
    if not rows:
        return ""
    columns = columns or list(dict.fromkeys(k for r in rows for k in r))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def read_field_csv(path) -> np.ndarray:
    """(n, 3) array of x, y, value."""
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def _normalise(field: ScalarField):
    v = field.values
    mask = field.grid.active
    lo, hi = float(v[mask].min()), float(v[mask].max())
    span = hi - lo if hi > lo else 1.0
    return np.where(mask, (v - lo) / span, np.nan), lo, hi


def ramp(t: np.ndarray) -> np.ndarray:
    """Map values in [0, 1] to RGB rows."""
    t = np.clip(np.asarray(t, float), 0.0, 1.0) * (len(_RAMP) - 1)
    i = np.minimum(t.astype(int), len(_RAMP) - 2)
    frac = (t - i)[..., None]
    return np.rint((1 - frac) * _RAMP[i] + frac * _RAMP[i + 1]).astype(int)


def field_pgm(field: ScalarField) -> bytes:
    """8-bit greyscale image; the top row is the largest y. Exterior nodes are black."""
    t, _, _ = _normalise(field)
    img = np.where(np.isnan(t), 0, np.rint(1 + 254 * np.nan_to_num(t))).astype(np.uint8)[::-1]
    ny, nx = img.shape
    return f"P5\n{nx} {ny}\n255\n".encode() + img.tobytes()


def field_svg(field: ScalarField, title: str = "", cell: int = 4) -> str:
    """Heatmap with one rectangle per active node and min/max annotations."""
    t, lo, hi = _normalise(field)
    ny, nx = t.shape
    width, height = nx * cell, ny * cell + 30
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">']
    colours = ramp(np.nan_to_num(t))
    for iy in range(ny):
        for ix in range(nx):
            if np.isnan(t[iy, ix]):
                continue
            r, g, b = colours[iy, ix]
            y = (ny - 1 - iy) * cell
            out.append(f'<rect x="{ix * cell}" y="{y}" width="{cell}" height="{cell}" '
                       f'fill="#{r:02x}{g:02x}{b:02x}"/>')
    label = f"{title} " if title else ""
    out.append(f'<text x="2" y="{ny * cell + 20}" font-family="monospace" font-size="12">'
               f'{label}min={lo:.6g} max={hi:.6g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def sha256_text(text: str | bytes) -> str:
    data = text.encode() if isinstance(text, str) else text
    return hashlib.sha256(data).hexdigest()


def write_text(path: Path, text: str | bytes) -> str:
    """Write and return the content hash."""
    path = Path(path)
    if isinstance(text, bytes):
        path.write_bytes(text)
    else:
        path.write_text(text)
    return sha256_text(text)
