"""Deterministic SVG scenes for grids, lens surfaces, packings and fractals.

Output is byte-stable: elements keep their input order (circles sorted by
level then id), every number is printed with at most six decimals, and a
leading comment carries the generator name and the parameters that produced
the file as sorted-key JSON.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from lensworks.geometry import Circle, Rect
from lensworks.surface import SurfaceState

GENERATOR = "lensworks"


def fmt(v: float) -> str:
    v = float(v)
    if not math.isfinite(v):
        raise ValueError(f"refusing to serialise non-finite coordinate {v}")
    s = f"{v:.6f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


@dataclass
class Style:
    stroke: str = "#203040"
    stroke_width: float | None = None
    fills: tuple[str, ...] = ("#c0392b", "#2471a3", "#229954", "#d68910", "#7d3c98", "#17a589")
    base_opacity: float = 0.55
    # fill opacity is multiplied by this at every level
    opacity_decay: float = 0.6


@dataclass
class Layer:
    name: str
    kind: str  # "circles" or "lenses"
    attrs: dict[str, str] = field(default_factory=dict)
    circles: list[tuple[float, float, float]] = field(default_factory=list)
    lenses: list[tuple[str, str]] = field(default_factory=list)  # (path data, fill)

    @property
    def fill_opacity(self) -> float | None:
        v = self.attrs.get("fill-opacity")
        return None if v is None else float(v)

    def __len__(self):
        return len(self.circles) + len(self.lenses)


@dataclass
class Scene:
    viewbox: Rect
    layers: list[Layer] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def element_count(self) -> int:
        return sum(len(layer) for layer in self.layers)


def _viewbox(centers: np.ndarray, radii: np.ndarray) -> Rect:
    if len(radii) == 0:
        return Rect(0.0, 0.0, 1.0, 1.0)
    lo = (centers - radii[:, None]).min(axis=0)
    hi = (centers + radii[:, None]).max(axis=0)
    pad = 0.02 * max(hi[0] - lo[0], hi[1] - lo[1])
    return Rect(lo[0] - pad, lo[1] - pad, hi[0] + pad, hi[1] + pad)


def scene_from_circles(circles: Iterable[Circle], style: Style | None = None) -> Scene:
    """One layer per fractal level, fill opacity shrinking geometrically with depth."""
    style = style or Style()
    ordered = sorted(circles, key=lambda c: (c.level, c.id))
    if not ordered:
        return Scene(Rect(0.0, 0.0, 1.0, 1.0), [Layer("level-0", "circles")])
    centers = np.array([c.center for c in ordered], dtype=float)
    radii = np.array([c.radius for c in ordered], dtype=float)
    box = _viewbox(centers, radii)
    width = style.stroke_width or max(box.width, box.height) / 1500
    layers: dict[int, Layer] = {}
    for c in ordered:
        layer = layers.get(c.level)
        if layer is None:
            layer = layers[c.level] = Layer(
                f"level-{c.level}",
                "circles",
                {
                    "fill": style.fills[c.level % len(style.fills)],
                    "fill-opacity": fmt(style.base_opacity * style.opacity_decay**c.level),
                    "stroke": style.stroke,
                    "stroke-width": fmt(width),
                },
            )
        layer.circles.append((c.cx, c.cy, c.radius))
    return Scene(box, [layers[k] for k in sorted(layers)])


def _minor_arc_sweep(center, start, end) -> int:
    ax, ay = start[0] - center[0], start[1] - center[1]
    bx, by = end[0] - center[0], end[1] - center[1]
    return 1 if ax * by - ay * bx > 0 else 0


def lens_path(a: tuple[float, float], b: tuple[float, float], r: float) -> str:
    """Path for the overlap of two radius-``r`` circles centered at ``a`` and ``b``,
    bounded by the minor arc of each circle between the intersection points."""
    dx, dy = b[0] - a[0], b[1] - a[1]
    d = math.hypot(dx, dy)
    if not 0 < d < 2 * r:
        raise ValueError("circles do not overlap")
    h = math.sqrt(r * r - d * d / 4)
    mx, my = (a[0] + b[0]) / 2, (a[1] + b[1]) / 2
    ux, uy = -dy / d, dx / d
    p1 = (mx + h * ux, my + h * uy)
    p2 = (mx - h * ux, my - h * uy)
    rr = fmt(r)
    return (
        f"M{fmt(p1[0])} {fmt(p1[1])}"
        f"A{rr} {rr} 0 0 {_minor_arc_sweep(a, p1, p2)} {fmt(p2[0])} {fmt(p2[1])}"
        f"A{rr} {rr} 0 0 {_minor_arc_sweep(b, p2, p1)} {fmt(p1[0])} {fmt(p1[1])}Z"
    )


DEFAULT_PALETTE = {"A": "#c0392b", "B": "#2471a3", "on": "#111111", "lens-stroke": "#888888"}


def scene_from_surface(s: SurfaceState, palette: dict[str, str] | None = None) -> Scene:
    """Lenses as true two-arc regions (filled when their value is 1) under the
    outlines of the A (red) and B (blue) circles."""
    pal = {**DEFAULT_PALETTE, **(palette or {})}
    lat = s.lattice
    r = lat.r
    rows, cols = lat.shape
    width = fmt(r / 40)
    lenses = Layer("lenses", "lenses", {"stroke": pal["lens-stroke"], "stroke-width": width})
    for l in range(rows):
        for k in range(cols):
            a, b = lat.lens_owner_centers(k, l)
            fill = pal["on"] if s.values[l, k] else "none"
            lenses.lenses.append((lens_path(a, b, r), fill))
    layers = [lenses]
    for packing in ("A", "B"):
        layer = Layer(f"packing-{packing}", "circles", {"fill": "none", "stroke": pal[packing], "stroke-width": width})
        for c in lat.circles():
            if c.packing == packing:
                layer.circles.append((c.cx, c.cy, c.radius))
        layers.append(layer)
    box = Rect(-r, -r, 2 * r * lat.bw + r, 2 * r * lat.bh + r)
    return Scene(box, layers)


def scene_from_cells(cells: np.ndarray, cell_size: float = 1.0, fill: str = "#111111") -> Scene:
    """A CA grid drawn as one square per occupied cell (row 0 at the top)."""
    cells = np.asarray(cells)
    h, w = cells.shape
    layer = Layer("cells", "lenses", {"stroke": "none"})
    for row, col in zip(*np.nonzero(cells)):
        x, y = col * cell_size, row * cell_size
        s = fmt(cell_size)
        layer.lenses.append((f"M{fmt(x)} {fmt(y)}h{s}v{s}h-{s}Z", fill))
    return Scene(Rect(0.0, 0.0, w * cell_size, h * cell_size), [layer])


def _attrs(d: dict[str, str]) -> str:
    return "".join(f' {k}="{v}"' for k, v in d.items())


def svg_text(scene: Scene) -> str:
    vb = scene.viewbox
    meta = json.dumps({"generator": GENERATOR, **scene.metadata}, sort_keys=True, separators=(",", ":"))
    meta = meta.replace("--", "- -")
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>\n',
        f"<!-- {meta} -->\n",
        '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'viewBox="{fmt(vb.xmin)} {fmt(vb.ymin)} {fmt(vb.width)} {fmt(vb.height)}">\n',
    ]
    for layer in scene.layers:
        out.append(f'<g id="{layer.name}"{_attrs(layer.attrs)}>\n')
        for cx, cy, r in layer.circles:
            out.append(f'<circle cx="{fmt(cx)}" cy="{fmt(cy)}" r="{fmt(r)}"/>\n')
        for d, fill in layer.lenses:
            out.append(f'<path d="{d}" fill="{fill}"/>\n')
        out.append("</g>\n")
    out.append("</svg>\n")
    return "".join(out)


def write_svg(scene: Scene, path: str | Path) -> Path:
    path = Path(path)
    text = svg_text(scene)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write SVG: {exc.strerror}", str(path)) from exc
    return path


def read_svg_metadata(path: str | Path) -> dict:
    """Recover the metadata block embedded by :func:`write_svg`."""
    with open(path, encoding="utf-8") as fh:
        fh.readline()
        line = fh.readline().strip()
    if not (line.startswith("<!-- ") and line.endswith(" -->")):
        raise ValueError(f"{path}: no metadata comment")
    return json.loads(line[5:-4].replace("- -", "--"))
