"""Shared geometric atoms: circles, rectangles, the triangular lattice, and
near-linear neighbour queries over circle sets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class Circle:
    center: tuple[float, float]
    radius: float
    polarity: float = 0.0
    level: int = 0
    id: int = 0
    packing: str | None = None

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"circle radius must be positive, got {self.radius}")

    @property
    def cx(self) -> float:
        return self.center[0]

    @property
    def cy(self) -> float:
        return self.center[1]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "cx": self.cx,
            "cy": self.cy,
            "r": self.radius,
            "polarity": self.polarity,
            "level": self.level,
            "packing": self.packing,
        }


@dataclass(frozen=True)
class Rect:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError(f"empty rectangle {self}")

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    def corners(self) -> np.ndarray:
        return np.array(
            [[self.xmin, self.ymin], [self.xmax, self.ymin], [self.xmax, self.ymax], [self.xmin, self.ymax]]
        )

    def expanded(self, margin: float) -> "Rect":
        return Rect(self.xmin - margin, self.ymin - margin, self.xmax + margin, self.ymax + margin)

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        return (p[:, 0] >= self.xmin) & (p[:, 0] <= self.xmax) & (p[:, 1] >= self.ymin) & (p[:, 1] <= self.ymax)

    def meets_disks(self, centers: np.ndarray, radii) -> np.ndarray:
        """Mask of disks that intersect the (closed) rectangle."""
        c = np.asarray(centers, dtype=float).reshape(-1, 2)
        nx = np.clip(c[:, 0], self.xmin, self.xmax)
        ny = np.clip(c[:, 1], self.ymin, self.ymax)
        return np.hypot(c[:, 0] - nx, c[:, 1] - ny) <= radii

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.xmin, self.ymin, self.xmax, self.ymax)

    @classmethod
    def bounding(cls, points: np.ndarray) -> "Rect":
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        return cls(p[:, 0].min(), p[:, 1].min(), p[:, 0].max(), p[:, 1].max())


def circle_arrays(circles) -> tuple[np.ndarray, np.ndarray]:
    """``(centers[N, 2], radii[N])`` for a circle sequence or any object carrying those arrays."""
    if hasattr(circles, "centers") and hasattr(circles, "radii"):
        return np.asarray(circles.centers, dtype=float).reshape(-1, 2), np.asarray(circles.radii, dtype=float)
    circles = list(circles)
    if not circles:
        return np.zeros((0, 2)), np.zeros(0)
    centers = np.array([c.center for c in circles], dtype=float)
    radii = np.array([c.radius for c in circles], dtype=float)
    return centers, radii


def tri_lattice_points(r: float, rect: Rect) -> np.ndarray:
    """Centers of the tangent triangular packing of radius ``r`` lying in ``rect``.

    The lattice is ``{((2i + j) r, j r sqrt(3))}``, i.e. rows of pitch
    ``r sqrt(3)`` with alternate rows shifted by ``r``. Rows are emitted bottom
    to top, each left to right.
    """
    if r <= 0:
        raise ValueError(f"radius must be positive, got {r}")
    pitch = r * SQRT3
    j0, j1 = math.floor(rect.ymin / pitch), math.ceil(rect.ymax / pitch)
    rows = []
    for j in range(j0, j1 + 1):
        y = j * pitch
        if y < rect.ymin or y > rect.ymax:
            continue
        # x = (2i + j) r
        i0 = math.ceil((rect.xmin / r - j) / 2)
        i1 = math.floor((rect.xmax / r - j) / 2)
        if i1 < i0:
            continue
        xs = (2 * np.arange(i0, i1 + 1) + j) * r
        rows.append(np.column_stack([xs, np.full(len(xs), y)]))
    if not rows:
        return np.zeros((0, 2))
    return np.vstack(rows)


_HALF_NEIGHBOURS = ((0, 0), (1, -1), (1, 0), (1, 1), (0, 1))


def grid_candidate_pairs(centers: np.ndarray, cell: float) -> tuple[np.ndarray, np.ndarray]:
    """All index pairs ``i < j`` whose points fall in the same or adjacent grid cells.

    Bucketing is a uniform grid of side ``cell``; the work is proportional to
    the number of points times the per-cell occupancy.
    """
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    n = len(centers)
    if n < 2:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    if not cell > 0:
        raise ValueError("grid cell size must be positive")
    ix = np.floor(centers[:, 0] / cell).astype(np.int64)
    iy = np.floor(centers[:, 1] / cell).astype(np.int64)
    ix -= ix.min() - 1
    iy -= iy.min() - 1
    ny = int(iy.max()) + 2
    key = ix * ny + iy
    order = np.argsort(key, kind="stable")
    uniq, start, count = np.unique(key[order], return_index=True, return_counts=True)
    idx = np.arange(n)

    firsts, seconds = [], []
    for dx, dy in _HALF_NEIGHBOURS:
        nk = key + dx * ny + dy
        pos = np.searchsorted(uniq, nk)
        pos_c = np.minimum(pos, len(uniq) - 1)
        hit = (pos < len(uniq)) & (uniq[pos_c] == nk)
        for t in range(int(count.max())):
            m = hit & (t < count[pos_c])
            i = idx[m]
            j = order[start[pos_c[m]] + t]
            if dx == 0 and dy == 0:
                keep = i < j
                i, j = i[keep], j[keep]
            firsts.append(i)
            seconds.append(j)
    i = np.concatenate(firsts)
    j = np.concatenate(seconds)
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    return lo, hi


@dataclass
class OverlapReport:
    overlapping: list[tuple[int, int]]
    min_gap: float | None
    pairs_examined: int

    @property
    def ok(self) -> bool:
        return not self.overlapping


def overlap_report(circles, tol: float = 0.0, ids: Sequence[int] | None = None) -> OverlapReport:
    """Flag pairs with center distance ``< r_i + r_j - tol`` using a uniform grid index.

    ``min_gap`` is the smallest ``d - r_i - r_j`` among neighbouring pairs
    (None when no two circles share a neighbourhood).
    """
    if tol < 0:
        raise ValueError("tol must be >= 0")
    centers, radii = circle_arrays(circles)
    if ids is None:
        ids = _ids_of(circles, len(radii))
    if len(radii) < 2:
        return OverlapReport([], None, 0)
    i, j = grid_candidate_pairs(centers, 2.0 * float(radii.max()))
    d = np.hypot(centers[i, 0] - centers[j, 0], centers[i, 1] - centers[j, 1])
    gap = d - radii[i] - radii[j]
    bad = gap < -tol
    pairs = sorted((int(ids[a]), int(ids[b])) for a, b in zip(i[bad], j[bad]))
    return OverlapReport(pairs, float(gap.min()) if len(gap) else None, int(len(i)))


def overlap_report_bruteforce(circles, tol: float = 0.0) -> OverlapReport:
    """Exhaustive O(N^2) twin of :func:`overlap_report`, kept independent of the grid index."""
    centers, radii = circle_arrays(circles)
    ids = _ids_of(circles, len(radii))
    n = len(radii)
    if n < 2:
        return OverlapReport([], None, 0)
    i, j = np.triu_indices(n, k=1)
    d = np.sqrt(((centers[i] - centers[j]) ** 2).sum(axis=1))
    gap = d - radii[i] - radii[j]
    bad = gap < -tol
    pairs = sorted((int(ids[a]), int(ids[b])) for a, b in zip(i[bad], j[bad]))
    return OverlapReport(pairs, float(gap.min()), int(len(i)))


def _ids_of(circles, n: int) -> np.ndarray:
    if hasattr(circles, "ids"):
        return np.asarray(circles.ids)
    if isinstance(circles, (list, tuple)) and circles and isinstance(circles[0], Circle):
        return np.array([c.id for c in circles])
    return np.arange(n)


@dataclass
class MatchReport:
    unmatched_left: list[int]
    unmatched_right: list[int]
    matched: int

    @property
    def equal(self) -> bool:
        return not self.unmatched_left and not self.unmatched_right


def match_multisets(
    left_centers: np.ndarray,
    left_radii: np.ndarray,
    right_centers: np.ndarray,
    right_radii: np.ndarray,
    tol: float,
) -> MatchReport:
    """Pair two circle multisets one-to-one under a center/radius tolerance.

    The left set is hashed into square cells of side ``1000 * tol``. Each
    right circle, in order, takes the nearest unmatched left circle within
    ``tol`` whose radius also agrees within ``tol``; ties go to the smaller
    distance, then the lower index.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    lc = np.asarray(left_centers, dtype=float).reshape(-1, 2)
    rc = np.asarray(right_centers, dtype=float).reshape(-1, 2)
    lr = np.asarray(left_radii, dtype=float)
    rr = np.asarray(right_radii, dtype=float)
    cell = tol * 1e3
    buckets: dict[tuple[int, int], list[int]] = {}
    keys = np.floor(lc / cell).astype(np.int64)
    for idx, (kx, ky) in enumerate(keys.tolist()):
        buckets.setdefault((kx, ky), []).append(idx)

    used = np.zeros(len(lc), dtype=bool)
    unmatched_right = []
    rkeys = np.floor(rc / cell).astype(np.int64)
    for ridx, (kx, ky) in enumerate(rkeys.tolist()):
        best = None
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for lidx in buckets.get((kx + dx, ky + dy), ()):
                    if used[lidx] or abs(lr[lidx] - rr[ridx]) > tol:
                        continue
                    d = math.hypot(lc[lidx, 0] - rc[ridx, 0], lc[lidx, 1] - rc[ridx, 1])
                    if d <= tol and (best is None or (d, lidx) < best):
                        best = (d, lidx)
        if best is None:
            unmatched_right.append(ridx)
        else:
            used[best[1]] = True
    unmatched_left = [int(i) for i in np.flatnonzero(~used)]
    return MatchReport(unmatched_left, unmatched_right, int(used.sum()))


def rotate_points(points: np.ndarray, angle: float, about: Iterable[float] = (0.0, 0.0)) -> np.ndarray:
    """Rotate by ``angle`` radians (counter-clockwise in y-up coordinates)."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    o = np.asarray(tuple(about), dtype=float)
    c, s = math.cos(angle), math.sin(angle)
    q = p - o
    return np.column_stack([c * q[:, 0] - s * q[:, 1], s * q[:, 0] + c * q[:, 1]]) + o
