"""Fractal T (iterated shrink-and-turn of a triangular packing) and Athena's
curve (three-circle production rule), with the checks that tie them together.

One iteration of fractal T maps every center through

    [x']       [ cos(pi/6)  sin(pi/6)] [x]
    [y'] = s * [-sin(pi/6)  cos(pi/6)] [y],    s = tan(pi/6) = 1/sqrt(3)

and multiplies radii by ``s``. The image of the tangent packing is again a
tangent packing containing the old centers plus the centroids of every
triangle of mutually tangent old circles.

Athena's production rule replaces a circle (radius r, polarity p) by three
circles of radius ``r s`` stacked along direction p, the middle one
concentric, all with polarity ``p + pi/6``. Applied to every circle of the
base packing, the x-th iterate reproduces level x of fractal T.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from lensworks.ca import check_seed
from lensworks.errors import ResourceError
from lensworks.geometry import (
    Circle,
    Rect,
    circle_arrays,
    grid_candidate_pairs,
    match_multisets,
    overlap_report,
    tri_lattice_points,
)
from lensworks.surface import BASE_POLARITY

TURN = math.pi / 6
SCALE = math.tan(TURN)
MAX_CURVE_CIRCLES = 2**24

_C, _S = math.cos(TURN), math.sin(TURN)
STEP_MATRIX = SCALE * np.array([[_C, _S], [-_S, _C]])
INVERSE_STEP_MATRIX = np.linalg.inv(STEP_MATRIX)


def descendant_reach(r: float, x: int) -> float:
    """Farthest an iteration-x Athena center can sit from its seed center."""
    return 2 * r * sum(SCALE**n for n in range(1, x + 1))


@dataclass
class FractalLevel:
    level: int
    centers: np.ndarray
    radius: float
    first_id: int = 0
    window: Rect | None = None

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=float).reshape(-1, 2)

    def __len__(self):
        return len(self.centers)

    @property
    def radii(self) -> np.ndarray:
        return np.full(len(self.centers), self.radius)

    @property
    def ids(self) -> np.ndarray:
        return self.first_id + np.arange(len(self.centers))

    @property
    def polarity(self) -> float:
        return BASE_POLARITY + self.level * TURN

    @property
    def circles(self) -> list[Circle]:
        return [
            Circle((float(x), float(y)), self.radius, self.polarity, self.level, int(i))
            for (x, y), i in zip(self.centers, self.ids)
        ]


def base_level(r: float, window: Rect, margin: float | None = None) -> FractalLevel:
    """Level 0: the triangular packing clipped to circles meeting ``window``."""
    margin = r if margin is None else margin
    pts = tri_lattice_points(r, window.expanded(margin))
    keep = window.meets_disks(pts, r)
    return FractalLevel(0, pts[keep], r, window=window)


def next_level(lv: FractalLevel) -> FractalLevel:
    if len(lv) == 0:
        raise ValueError("cannot iterate an empty level")
    return FractalLevel(lv.level + 1, lv.centers @ STEP_MATRIX.T, lv.radius * SCALE, lv.first_id, lv.window)


def previous_level(lv: FractalLevel) -> FractalLevel:
    """Inverse of :func:`next_level`."""
    if len(lv) == 0:
        raise ValueError("cannot iterate an empty level")
    if lv.level < 1:
        raise ValueError("level 0 has no predecessor in this construction")
    return FractalLevel(lv.level - 1, lv.centers @ INVERSE_STEP_MATRIX.T, lv.radius / SCALE, lv.first_id, lv.window)


def _reaches_window(centers: np.ndarray, radius: float, window: Rect, remaining: int) -> np.ndarray:
    """Mask of centers that meet ``window`` now or after up to ``remaining`` more iterations."""
    mask = np.zeros(len(centers), dtype=bool)
    pts, rad = centers, radius
    for _ in range(remaining + 1):
        mask |= window.meets_disks(pts, rad)
        pts, rad = pts @ STEP_MATRIX.T, rad * SCALE
    return mask


def fractal_t(levels: int, window: Rect, r: float = 1.0) -> list[FractalLevel]:
    """Levels ``0..levels`` of fractal T, each clipped to circles meeting ``window``.

    Deeper levels are images of base circles far outside the window, so the
    base packing is generated over every preimage of the window and pruned
    to what still matters before each iteration.
    """
    if levels < 0:
        raise ValueError("levels must be >= 0")
    region = window.expanded(r).corners()
    corners = [region]
    pts = region
    for _ in range(levels):
        pts = pts @ INVERSE_STEP_MATRIX.T
        corners.append(pts)
    cover = Rect.bounding(np.vstack(corners)).expanded(2 * r)
    work = FractalLevel(0, tri_lattice_points(r, cover), r, window=window)

    out = []
    next_id = 0
    for k in range(levels + 1):
        if k:
            work = next_level(work)
        work.centers = work.centers[_reaches_window(work.centers, work.radius, window, levels - k)]
        shown = work.centers[window.meets_disks(work.centers, work.radius)]
        out.append(FractalLevel(k, shown, work.radius, next_id, window))
        next_id += len(shown)
    return out


# ---------------------------------------------------------------- Athena's curve


def athena_step(c: Circle) -> tuple[Circle, Circle, Circle]:
    """Replace ``c`` by three touching circles along its polarity: above, middle, below."""
    if not c.radius > 0:
        raise ValueError(f"radius must be positive, got {c.radius}")
    r = c.radius * SCALE
    dx, dy = 2 * r * math.cos(c.polarity), 2 * r * math.sin(c.polarity)
    p = c.polarity + TURN
    x, y = c.center
    return (
        Circle((x + dx, y + dy), r, p, c.level + 1, 3 * c.id),
        Circle((x, y), r, p, c.level + 1, 3 * c.id + 1),
        Circle((x - dx, y - dy), r, p, c.level + 1, 3 * c.id + 2),
    )


@dataclass
class AthenaCurve:
    seed: Circle
    iteration: int
    centers: np.ndarray
    radius: float
    polarity: float

    def __len__(self):
        return len(self.centers)

    @property
    def radii(self) -> np.ndarray:
        return np.full(len(self.centers), self.radius)

    @property
    def ids(self) -> np.ndarray:
        return np.arange(len(self.centers))

    @property
    def circles(self) -> list[Circle]:
        return [
            Circle((float(x), float(y)), self.radius, self.polarity, self.iteration, i)
            for i, (x, y) in enumerate(self.centers)
        ]


def check_curve_size(x: int, allow_large: bool = False) -> None:
    if x < 0:
        raise ValueError("iteration count must be >= 0")
    if 3**x > MAX_CURVE_CIRCLES and not allow_large:
        raise ResourceError(f"3^{x} circles exceeds the cap of {MAX_CURVE_CIRCLES}; pass allow_large to override")


def athena_curve(seed: Circle, x: int, allow_large: bool = False) -> AthenaCurve:
    """``x`` applications of the production rule, children ordered above/middle/below."""
    check_curve_size(x, allow_large)
    centers = np.array([seed.center], dtype=float)
    r, p = seed.radius, seed.polarity
    for _ in range(x):
        r *= SCALE
        d = 2 * r * np.array([math.cos(p), math.sin(p)])
        centers = np.stack([centers + d, centers, centers - d], axis=1).reshape(-1, 2)
        p += TURN
    return AthenaCurve(seed, x, centers, r, p)


def athena_curves(seeds: list[Circle], x: int) -> tuple[np.ndarray, float]:
    """Centers and common radius of the iteration-x curves of every seed (equal radii assumed)."""
    if not seeds:
        return np.zeros((0, 2)), 0.0
    curves = [athena_curve(s, x) for s in seeds]
    return np.vstack([c.centers for c in curves]), curves[0].radius


@dataclass
class MeasureReport:
    total_area: float
    total_length: float
    count: int


def measures(circles) -> MeasureReport:
    _, radii = circle_arrays(circles)
    return MeasureReport(
        math.fsum(math.pi * radii**2),
        math.fsum(2 * math.pi * radii),
        int(len(radii)),
    )


def athena_area_law(r: float, x: int) -> float:
    return math.pi * r**2


def athena_length_law(r: float, x: int) -> float:
    return 2 * math.pi * r * 3 ** (x / 2)


def curve_overlap_report(curve: AthenaCurve, tol: float = 1e-9):
    return overlap_report(curve, tol)


# ---------------------------------------------------------------- cross-checks


@dataclass
class TilingReport:
    equal: bool
    compared: int
    unmatched_curve: list[int]
    unmatched_packing: list[int]
    interior: Rect | None = None
    level: int = 0


def tiling_check(x: int, rows: int, cols: int, tol: float = 1e-9, r: float = 1.0) -> TilingReport:
    """Grow an Athena curve from every circle of a rows x cols base patch and
    compare, on the region only this patch can reach, with level ``x`` of fractal T."""
    if x < 0:
        raise ValueError("x must be >= 0")
    seeds = [
        Circle((2 * r * i + r * (j % 2), j * r * math.sqrt(3)), r, BASE_POLARITY, 0, j * cols + i)
        for j in range(rows)
        for i in range(cols)
    ]
    reach = descendant_reach(r, x)
    # every row of the patch covers x in [r, 2r(cols-1)]
    try:
        interior = Rect(r + reach, reach, 2 * r * (cols - 1) - reach, (rows - 1) * r * math.sqrt(3) - reach)
    except ValueError:
        raise ValueError(f"a {rows}x{cols} patch has no interior at iteration {x}") from None
    curve_pts, curve_r = athena_curves(seeds, x)
    lv = fractal_t(x, interior, r)[x]
    return _compare_in(interior, curve_pts, curve_r, lv.centers, lv.radius, tol, x)


def _compare_in(region: Rect, a: np.ndarray, ra: float, b: np.ndarray, rb: float, tol: float, x: int) -> TilingReport:
    """Match two equal-radius center sets inside ``region``.

    Both sets are cut with a slightly enlarged region so that a center lying
    on the edge is not lost from one side by rounding; a leftover only counts
    as a mismatch when it sits clearly inside ``region``.
    """
    outer = region.expanded(4 * tol)
    a = a[outer.contains(a)]
    b = b[outer.contains(b)]
    m = match_multisets(a, np.full(len(a), ra), b, np.full(len(b), rb), tol)
    inner = region.expanded(-4 * tol)
    left = [i for i in m.unmatched_left if inner.contains(a[i])[0]]
    right = [i for i in m.unmatched_right if inner.contains(b[i])[0]]
    compared = int(inner.contains(b).sum())
    return TilingReport(not left and not right, compared, left, right, region, x)


@dataclass
class OmegaReport:
    equal: bool
    levels: list[TilingReport] = field(default_factory=list)
    first_mismatch: int | None = None


def omega_equals_t(levels: int, window: Rect, tol: float = 1e-6, r: float = 1.0) -> OmegaReport:
    """For each x <= levels, the union of iteration-x curves of the base packing
    against level x of fractal T, restricted to centers inside ``window``."""
    if levels < 0:
        raise ValueError("levels must be >= 0")
    t_levels = fractal_t(levels, window, r)
    seeds_pts = tri_lattice_points(r, window.expanded(descendant_reach(r, levels) + r))
    seeds = [Circle((float(px), float(py)), r, BASE_POLARITY, 0, i) for i, (px, py) in enumerate(seeds_pts)]
    report = OmegaReport(True)
    for x in range(levels + 1):
        pts, rad = athena_curves(seeds, x)
        level_report = _compare_in(window, pts, rad, t_levels[x].centers, t_levels[x].radius, tol, x)
        report.levels.append(level_report)
        if not level_report.equal and report.equal:
            report.equal = False
            report.first_mismatch = x
    return report


@dataclass
class AnchoringReport:
    ok: bool
    concentric: int
    centroid: int
    unanchored: list[int]


def tangent_triangle_centroids(centers: np.ndarray, r: float, tol: float = 1e-9) -> np.ndarray:
    """Centroids of every triple of mutually tangent equal circles."""
    i, j = grid_candidate_pairs(centers, 2 * r * 1.01)
    d = np.hypot(*(centers[i] - centers[j]).T)
    tangent = np.abs(d - 2 * r) <= tol
    nbrs: dict[int, set[int]] = {}
    for a, b in zip(i[tangent].tolist(), j[tangent].tolist()):
        nbrs.setdefault(a, set()).add(b)
        nbrs.setdefault(b, set()).add(a)
    tris = set()
    for a, bs in nbrs.items():
        for b in bs:
            for c in bs & nbrs[b]:
                tris.add(tuple(sorted((a, b, c))))
    if not tris:
        return np.zeros((0, 2))
    idx = np.array(sorted(tris))
    return centers[idx].mean(axis=1)


def level_one_anchoring(window: Rect, r: float = 1.0, tol: float = 1e-9) -> AnchoringReport:
    """Classify level-1 centers (away from the window edge) as concentric with a
    level-0 circle or sitting at a tangent-triangle centroid."""
    lv0, lv1 = fractal_t(1, window, r)[:2]
    centroids = tangent_triangle_centroids(lv0.centers, r, tol)
    inner = Rect(window.xmin + 2 * r, window.ymin + 2 * r, window.xmax - 2 * r, window.ymax - 2 * r)
    probe = lv1.centers[inner.contains(lv1.centers)]
    probe_ids = lv1.ids[inner.contains(lv1.centers)]

    def nearest(ref: np.ndarray) -> np.ndarray:
        if len(ref) == 0:
            return np.full(len(probe), np.inf)
        return cKDTree(ref).query(probe)[0]

    d0 = nearest(lv0.centers)
    dc = nearest(centroids)
    concentric = d0 <= tol
    centroid = ~concentric & (dc <= tol)
    unanchored = [int(i) for i in probe_ids[~(concentric | centroid)]]
    ok = not unanchored and concentric.any() and centroid.any()
    return AnchoringReport(bool(ok), int(concentric.sum()), int(centroid.sum()), unanchored)


# ---------------------------------------------------------------- radial symmetry


@dataclass
class SymmetryReport:
    examined: int
    asymmetric: int
    orders: dict[int, int] = field(default_factory=dict)


SYMMETRY_ORDERS = (6, 3, 2)


def arrangement_order(rel: np.ndarray, radii: np.ndarray, tol: float = 1e-7) -> int:
    """Largest n in (6, 3, 2) such that rotating the circle arrangement by
    2 pi / n maps it onto itself; 1 if none does."""
    if len(rel) == 0:
        return 6
    for n in SYMMETRY_ORDERS:
        a = 2 * math.pi / n
        c, s = math.cos(a), math.sin(a)
        turned = np.column_stack([c * rel[:, 0] - s * rel[:, 1], s * rel[:, 0] + c * rel[:, 1]])
        if match_multisets(rel, radii, turned, radii, tol).equal:
            return n
    return 1


def radial_symmetry_probe(levels: list[FractalLevel], target_level: int, tol: float = 1e-7) -> SymmetryReport:
    """Count target-level circles whose inner pieces lack rotational symmetry.

    The pieces inside a circle are cut by every other circle whose boundary
    passes through its interior (``|d - r_other| < r_target``), from any level
    in ``levels``. A circle counts as radially symmetric when that set of
    arcs is invariant under a turn of 2 pi / n for some n in (6, 3, 2). Only
    circles lying wholly inside the generation window are examined, so the
    arrangement around them is complete.
    """
    targets = [lv for lv in levels if lv.level == target_level]
    if not targets or len(targets[0]) == 0:
        return SymmetryReport(0, 0)
    tgt = targets[0]
    all_c = np.vstack([lv.centers for lv in levels])
    all_r = np.concatenate([lv.radii for lv in levels])
    tree = cKDTree(all_c)
    max_r = float(all_r.max())
    window = tgt.window
    report = SymmetryReport(0, 0)
    for ct in tgt.centers:
        rt = tgt.radius
        if window is not None and not (
            window.xmin + rt <= ct[0] <= window.xmax - rt and window.ymin + rt <= ct[1] <= window.ymax - rt
        ):
            continue
        near = np.array(tree.query_ball_point(ct, rt + max_r), dtype=np.int64)
        if len(near):
            d = np.hypot(all_c[near, 0] - ct[0], all_c[near, 1] - ct[1])
            crossing = near[np.abs(d - all_r[near]) < rt - tol]
        else:
            crossing = near
        order = arrangement_order(all_c[crossing] - ct, all_r[crossing], tol)
        report.examined += 1
        report.orders[order] = report.orders.get(order, 0) + 1
        if order == 1:
            report.asymmetric += 1
    return report


# ---------------------------------------------------------------- union area


@dataclass
class AreaEstimate:
    mean: float
    stderr: float
    samples: int
    region_area: float
    seed: int

    @property
    def area(self) -> float:
        return self.mean * self.region_area


MC_CHUNK = 1 << 16


def worker_count() -> int:
    env = os.environ.get("LENSWORKS_THREADS")
    if env:
        return max(1, int(env))
    return max(1, min(8, os.cpu_count() or 1))


def union_area_estimate(
    x_max: int,
    samples: int,
    seed: int,
    r: float = 1.0,
    half_width: float | None = None,
    workers: int | None = None,
) -> AreaEstimate:
    """Monte-Carlo fraction of a square around the seed circle covered by the
    union of Athena iterations ``0..x_max`` of that circle.

    Samples are drawn in fixed-size chunks, each seeded from ``(seed, chunk
    index)``, so the estimate does not depend on the number of workers.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    check_seed(seed)
    check_curve_size(x_max)
    h = r if half_width is None else half_width
    seed_circle = Circle((0.0, 0.0), r, BASE_POLARITY)
    trees = []
    for x in range(x_max + 1):
        curve = athena_curve(seed_circle, x)
        trees.append((cKDTree(curve.centers), curve.radius))

    def covered(chunk: int) -> int:
        n = min(MC_CHUNK, samples - chunk * MC_CHUNK)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(2, chunk))))
        pts = rng.uniform(-h, h, size=(n, 2))
        hit = np.zeros(n, dtype=bool)
        for tree, rad in trees:
            todo = np.flatnonzero(~hit)
            if len(todo) == 0:
                break
            dist, _ = tree.query(pts[todo], distance_upper_bound=rad)
            hit[todo[dist < rad]] = True
        return int(hit.sum())

    chunks = range((samples + MC_CHUNK - 1) // MC_CHUNK)
    workers = workers or worker_count()
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            hits = sum(pool.map(covered, chunks))
    else:
        hits = sum(map(covered, chunks))
    p = hits / samples
    return AreaEstimate(p, math.sqrt(p * (1 - p) / samples), samples, (2 * h) ** 2, seed)
