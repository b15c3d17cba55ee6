"""Plain-text artifact writers: PGM rasters, CSV grids and SVG polylines."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .scenario import GridSpec

__all__ = ["write_pgm", "write_grid_csv", "contour_segments", "SvgFigure", "fmt"]


def fmt(v: float) -> str:
    """Nine significant digits, the SVG number format."""
    return f"{float(v):.9g}"


def write_pgm(path, values, vmin=None, vmax=None) -> None:
    """Binary 8-bit PGM; row 0 of ``values`` is the bottom of the image.

    Boolean rasters map to black and white; numeric ones are scaled to
    ``[vmin, vmax]`` (data range by default) with non-finite cells white.
    """
    raw = np.asarray(values)
    if raw.dtype == bool:
        img = np.where(raw, 255, 0)
    else:
        a = raw.astype(float)
        fin = np.isfinite(a)
        lo = vmin if vmin is not None else (float(a[fin].min()) if fin.any() else 0.0)
        hi = vmax if vmax is not None else (float(a[fin].max()) if fin.any() else 1.0)
        span = hi - lo if hi > lo else 1.0
        img = np.where(fin, np.clip((np.where(fin, a, lo) - lo) / span, 0, 1) * 254, 255)
    img = np.flipud(np.rint(img).astype(np.uint8))
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
        fh.write(img.tobytes())


def write_grid_csv(path, grid: GridSpec, columns: dict) -> None:
    """One row per cell: ``x, y`` then the named per-cell arrays."""
    X, Y = grid.mesh()
    names = list(columns)
    arrs = [np.asarray(columns[k]).ravel() for k in names]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y"] + names)
        for k, (x, y) in enumerate(zip(X.ravel(), Y.ravel())):
            w.writerow([repr(float(x)), repr(float(y))] + [_cell(a[k]) for a in arrs])


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    return repr(float(v))


# marching squares: corner bits (bl, br, tr, tl) -> edge pairs; edges 0 bottom, 1 right, 2 top, 3 left
_CASES = {
    1: [(3, 0)], 2: [(0, 1)], 3: [(3, 1)], 4: [(1, 2)], 5: [(3, 2), (0, 1)], 6: [(0, 2)], 7: [(3, 2)],
    8: [(2, 3)], 9: [(2, 0)], 10: [(2, 1), (0, 3)], 11: [(2, 1)], 12: [(1, 3)], 13: [(1, 0)], 14: [(0, 3)],
}


def contour_segments(grid: GridSpec, values, level: float = 0.0) -> list[tuple]:
    """Segments of the ``level`` set of cell-centred ``values`` (marching
    squares, no joining). Non-finite values count as above the level."""
    v = np.where(np.isfinite(values), np.asarray(values, float), np.inf)
    xs, ys = grid.xs, grid.ys
    segs = []
    below = v < level
    n_i, n_j = v.shape
    for i in range(n_i - 1):
        row_any = below[i:i + 2].any(axis=0)
        row_all = below[i:i + 2].all(axis=0)
        for j in range(n_j - 1):
            if not (row_any[j] or row_any[j + 1]) or (row_all[j] and row_all[j + 1]):
                continue
            c = (v[i, j], v[i, j + 1], v[i + 1, j + 1], v[i + 1, j])
            code = sum(1 << k for k in range(4) if c[k] < level)
            if code in (0, 15):
                continue
            x0, x1, y0, y1 = xs[j], xs[j + 1], ys[i], ys[i + 1]
            corners = ((x0, y0), (x1, y0), (x1, y1), (x0, y1))

            def point(e):
                a, b = e, (e + 1) % 4
                va, vb = c[a], c[b]
                if not np.isfinite(va) or not np.isfinite(vb):
                    t = 0.5
                else:
                    t = (level - va) / (vb - va) if vb != va else 0.5
                pa, pb = corners[a], corners[b]
                return (pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1]))

            for e1, e2 in _CASES[code]:
                segs.append((point(e1), point(e2)))
    return segs


class SvgFigure:
    """Minimal SVG canvas in chart coordinates (y up)."""

    def __init__(self, chart, width: int = 600):
        self.chart = chart
        self.width = width
        w = chart.x_max - chart.x_min
        h = chart.y_max - chart.y_min
        self.scale = width / w
        self.height = h * self.scale
        self.items: list[str] = []

    def _xy(self, p):
        return (fmt((p[0] - self.chart.x_min) * self.scale), fmt((self.chart.y_max - p[1]) * self.scale))

    def polyline(self, points, color="black", width=1.0, title=None):
        pts = " ".join(",".join(self._xy(p)) for p in points)
        t = f"<title>{title}</title>" if title else ""
        self.items.append(f'<polyline fill="none" stroke="{color}" stroke-width="{fmt(width)}" points="{pts}">{t}</polyline>')

    def segments(self, segs, color="black", width=1.0, title=None):
        if not segs:
            return
        d = " ".join("M{} {} L{} {}".format(*self._xy(a), *self._xy(b)) for a, b in segs)
        t = f"<title>{title}</title>" if title else ""
        self.items.append(f'<path fill="none" stroke="{color}" stroke-width="{fmt(width)}" d="{d}">{t}</path>')

    def marker(self, p, color="red", radius=3.0):
        x, y = self._xy(p)
        self.items.append(f'<circle cx="{x}" cy="{y}" r="{fmt(radius)}" fill="{color}"/>')

    def text(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{fmt(self.width)}" height="{fmt(self.height)}" '
                f'viewBox="0 0 {fmt(self.width)} {fmt(self.height)}">')
        frame = f'<rect x="0" y="0" width="{fmt(self.width)}" height="{fmt(self.height)}" fill="white" stroke="gray"/>'
        return "\n".join([head, frame] + self.items + ["</svg>"]) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.text())
