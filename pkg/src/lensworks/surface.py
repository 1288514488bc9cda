"""Circle-packing surfaces and the lens lattice they cut.

Two square packings of radius-``r`` circles are laid on a torus: packing A
with centers ``(2ri, 2rj)`` and packing B shifted by ``(r, r)``. Neighbouring
A and B circles meet at right angles and their overlaps are the lenses. Lens
``(k, l)`` sits at ``((2k+1) r/2, (2l+1) r/2)``; A-circle ``(i, j)`` owns
lenses ``{2i-1, 2i} x {2j-1, 2j}`` and B-circle ``(i, j)`` owns
``{2i, 2i+1} x {2j, 2j+1}`` (indices taken modulo the lattice size).

Cell ``(col, row)`` of a CA grid is identified with lens ``(col, row)``.
Even-phase blocks are therefore owned by B circles and Odd-phase blocks by A
circles. Lens values are stored as ``values[l, k]`` to line up with
``Grid.cells[row, col]``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from lensworks import ca
from lensworks.errors import DimensionError, ReplayError
from lensworks.geometry import SQRT3, Circle

BASE_POLARITY = math.pi / 2


@dataclass(frozen=True)
class LensLattice:
    r: float
    bw: int
    bh: int

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"radius must be positive, got {self.r}")
        if self.bw < 1 or self.bh < 1:
            raise DimensionError(f"block counts must be >= 1, got {self.bw}x{self.bh}")

    @property
    def shape(self) -> tuple[int, int]:
        """``(rows, cols)`` of the lens value array."""
        return (2 * self.bh, 2 * self.bw)

    @property
    def lens_count(self) -> int:
        return 4 * self.bw * self.bh

    @property
    def circles_per_packing(self) -> int:
        return self.bw * self.bh

    def lens_center(self, k: int, l: int) -> tuple[float, float]:
        return ((2 * k + 1) * self.r / 2, (2 * l + 1) * self.r / 2)

    def circle_id(self, packing: str, i: int, j: int) -> int:
        base = 0 if packing == "A" else self.circles_per_packing
        return base + (j % self.bh) * self.bw + (i % self.bw)

    def locate(self, circle_id: int) -> tuple[str, int, int]:
        if not 0 <= circle_id < 2 * self.circles_per_packing:
            raise KeyError(f"no circle with id {circle_id}")
        packing = "A" if circle_id < self.circles_per_packing else "B"
        local = circle_id % self.circles_per_packing
        return packing, local % self.bw, local // self.bw

    def circles(self) -> list[Circle]:
        out = []
        for packing, offset in (("A", 0.0), ("B", self.r)):
            for j in range(self.bh):
                for i in range(self.bw):
                    out.append(
                        Circle(
                            center=(2 * self.r * i + offset, 2 * self.r * j + offset),
                            radius=self.r,
                            id=self.circle_id(packing, i, j),
                            packing=packing,
                        )
                    )
        return out

    def owned_lenses(self, circle_id: int) -> list[tuple[int, int]]:
        """The four ``(k, l)`` lens indices of a circle in CW order: nw, ne, se, sw."""
        packing, i, j = self.locate(circle_id)
        k0, l0 = (2 * i - 1, 2 * j - 1) if packing == "A" else (2 * i, 2 * j)
        rows, cols = self.shape
        ring = [(k0, l0), (k0 + 1, l0), (k0 + 1, l0 + 1), (k0, l0 + 1)]
        return [(k % cols, l % rows) for k, l in ring]

    def lens_owner_centers(self, k: int, l: int) -> tuple[tuple[float, float], tuple[float, float]]:
        """Unwrapped centers of the A and B circles whose overlap is lens ``(k, l)``."""
        r = self.r
        a = (2 * r * math.ceil(k / 2), 2 * r * math.ceil(l / 2))
        b = (2 * r * (k // 2) + r, 2 * r * (l // 2) + r)
        return a, b


@dataclass
class SurfaceState:
    lattice: LensLattice
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.uint8)
        if self.values.shape != self.lattice.shape:
            raise DimensionError(f"lens values have shape {self.values.shape}, expected {self.lattice.shape}")
        if self.values.size and self.values.max() > 1:
            raise ValueError("lens values must be 0 or 1")

    def copy(self) -> "SurfaceState":
        return SurfaceState(self.lattice, self.values.copy())

    def total(self) -> int:
        return int(self.values.sum(dtype=np.int64))

    def to_scene_dict(self) -> dict:
        rows, cols = self.lattice.shape
        return {
            "circles": [c.to_dict() for c in self.lattice.circles()],
            "lenses": [{"k": k, "l": l, "value": int(self.values[l, k])} for l in range(rows) for k in range(cols)],
        }

    @classmethod
    def from_grid(cls, g: ca.Grid, r: float = 1.0) -> "SurfaceState":
        return cls(LensLattice(r, g.width // 2, g.height // 2), g.cells.copy())


def build_square2_surface(r: float, bw: int, bh: int) -> SurfaceState:
    lattice = LensLattice(r, bw, bh)
    return SurfaceState(lattice, np.zeros(lattice.shape, dtype=np.uint8))


def _rotate_in_place(s: SurfaceState, circle_id: int, quarter_turns: int) -> None:
    q = quarter_turns % 4
    ring = s.lattice.owned_lenses(circle_id)
    if q == 0:
        return
    old = [s.values[l, k] for k, l in ring]
    for p, (k, l) in enumerate(ring):
        s.values[l, k] = old[(p - q) % 4]


def rotate_circle(s: SurfaceState, circle_id: int, quarter_turns: int) -> SurfaceState:
    out = s.copy()
    _rotate_in_place(out, circle_id, quarter_turns)
    return out


@dataclass(frozen=True)
class ScriptEntry:
    circle_id: int
    quarter_turns: int
    packing: str

    def __post_init__(self):
        if self.quarter_turns not in (0, 1, 2, 3):
            raise ValueError(f"quarter_turns must be in 0..3, got {self.quarter_turns}")
        if self.packing not in ("A", "B"):
            raise ValueError(f"packing must be 'A' or 'B', got {self.packing!r}")


@dataclass
class RotationScript:
    entries: list[ScriptEntry] = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def to_list(self) -> list[dict]:
        return [{"circle_id": e.circle_id, "quarter_turns": e.quarter_turns, "packing": e.packing} for e in self.entries]

    @classmethod
    def from_list(cls, items: list[dict]) -> "RotationScript":
        return cls([ScriptEntry(int(d["circle_id"]), int(d["quarter_turns"]), str(d["packing"])) for d in items])


def apply_script(s: SurfaceState, script: RotationScript) -> SurfaceState:
    out = s.copy()
    for e in script:
        packing, _, _ = out.lattice.locate(e.circle_id)
        if packing != e.packing:
            raise ValueError(f"circle {e.circle_id} belongs to packing {packing}, script says {e.packing}")
        _rotate_in_place(out, e.circle_id, e.quarter_turns)
    return out


def ca_step_to_script(
    lattice: LensLattice, phase: ca.Phase, rule: ca.RuleKind, choices: np.ndarray | None = None
) -> RotationScript:
    """Circle rotations that perform one CA step from ``phase``.

    Blocks are visited row-major over their anchors, the same order the CA
    draws choices in. CW becomes one quarter turn, CCW three.
    """
    nblocks = lattice.bw * lattice.bh
    if rule.consumes_choices:
        if choices is None or len(choices) != nblocks:
            have = None if choices is None else len(choices)
            raise ReplayError(f"choice segment has {have} entries, {nblocks} blocks need one each")
        ccw = np.asarray(choices, dtype=bool)
    elif rule is ca.RuleKind.ALWAYS_CW:
        ccw = np.zeros(nblocks, dtype=bool)
    elif rule is ca.RuleKind.ALWAYS_CCW:
        ccw = np.ones(nblocks, dtype=bool)
    else:
        ccw = np.full(nblocks, phase is ca.Phase.ODD)

    packing = "B" if phase is ca.Phase.EVEN else "A"
    # odd anchor (2i+1, 2j+1) is the nw lens of A-circle (i+1, j+1)
    shift = 0 if phase is ca.Phase.EVEN else 1
    entries = []
    for b in range(nblocks):
        j, i = divmod(b, lattice.bw)
        cid = lattice.circle_id(packing, i + shift, j + shift)
        entries.append(ScriptEntry(cid, 3 if ccw[b] else 1, packing))
    return RotationScript(entries)


@dataclass
class EquivalenceReport:
    equal: bool
    steps_checked: int
    first_divergence: int | None = None


def equivalence_check(g0: ca.Grid, steps: int, rule: ca.RuleKind, seed: int, r: float = 1.0) -> EquivalenceReport:
    """Evolve ``g0`` as a CA and, in lockstep, as circle rotations on the lens surface."""
    surface = SurfaceState.from_grid(g0, r)
    stream = ca.ChoiceStream(seed)
    g = g0
    for step in range(1, steps + 1):
        phase = g.phase
        g = ca.margolus_step(g, rule, stream)
        segment = stream.segments[-1] if rule.consumes_choices else None
        surface = apply_script(surface, ca_step_to_script(surface.lattice, phase, rule, segment))
        if not np.array_equal(surface.values, g.cells):
            return EquivalenceReport(False, step, step)
    return EquivalenceReport(True, steps)


@dataclass
class BlockOracleReport:
    cases: int
    mismatches: list[tuple[str, int, str]]

    @property
    def equal(self) -> bool:
        return not self.mismatches


def exhaustive_block_oracle() -> BlockOracleReport:
    """Every Block4 state under both rotations, in both phases, three ways.

    The block is placed on a 4x4 grid at the phase's anchor and updated by
    ``rotate_block``, by ``margolus_step`` and by the circle-rotation script;
    all three must agree.
    """
    mismatches = []
    cases = 0
    for phase in ca.Phase:
        a = int(phase)
        ring = [(a, a), (a + 1, a), (a, a + 1), (a + 1, a + 1)]  # (col, row) of nw, ne, sw, se
        for code in range(16):
            block = ca.Block4.from_int(code)
            for direction in ca.Rotation:
                cases += 1
                cells = np.zeros((4, 4), dtype=np.uint8)
                for (col, row), v in zip(ring, block):
                    cells[row % 4, col % 4] = v
                g = ca.Grid(4, 4, cells, phase)
                rule = ca.RuleKind.ALWAYS_CW if direction is ca.Rotation.CW else ca.RuleKind.ALWAYS_CCW
                expected = ca.rotate_block(block, direction)
                stepped = ca.margolus_step(g, rule)
                via_ca = ca.Block4(*(int(stepped.cells[row % 4, col % 4]) for col, row in ring))
                surface = SurfaceState.from_grid(g)
                surface = apply_script(surface, ca_step_to_script(surface.lattice, phase, rule))
                via_lens = ca.Block4(*(int(surface.values[row % 4, col % 4]) for col, row in ring))
                if via_ca != expected or via_lens != expected or not np.array_equal(surface.values, stepped.cells):
                    mismatches.append((phase.name, code, direction.name))
    return BlockOracleReport(cases, mismatches)


def perpendicularity_residuals(lattice: LensLattice) -> np.ndarray:
    """``|d^2 - 2 r^2|`` for the A-B circle pair of every lens."""
    rows, cols = lattice.shape
    out = np.empty(rows * cols)
    for n, (l, k) in enumerate(np.ndindex(rows, cols)):
        (ax, ay), (bx, by) = lattice.lens_owner_centers(k, l)
        out[n] = abs((ax - bx) ** 2 + (ay - by) ** 2 - 2 * lattice.r**2)
    return out


# ---------------------------------------------------------------- hexagonal packings


def build_tri_packing(r: float, rows: int, cols: int) -> list[Circle]:
    """Tangent triangular packing: row ``j`` at height ``j r sqrt(3)``, odd rows shifted by ``r``."""
    if not r > 0:
        raise ValueError(f"radius must be positive, got {r}")
    if rows < 0 or cols < 0:
        raise ValueError("extent must be non-negative")
    out = []
    for j in range(rows):
        for i in range(cols):
            out.append(
                Circle(
                    center=(2 * r * i + r * (j % 2), j * r * SQRT3),
                    radius=r,
                    polarity=BASE_POLARITY,
                    id=j * cols + i,
                )
            )
    return out


class VariantKind(enum.Enum):
    EXTENDED = "extended"
    DOUBLED = "doubled"


def build_variant_packing(kind: VariantKind, r: float, rows: int, cols: int, factor: float | None = None) -> list[Circle]:
    """Triangular-packing centers with radii scaled by ``factor`` (2 for DOUBLED)."""
    kind = VariantKind(kind)
    if kind is VariantKind.DOUBLED:
        factor = 2.0
    if factor is None or not factor > 1:
        raise ValueError(f"radius factor must exceed 1, got {factor}")
    return [
        Circle(c.center, c.radius * factor, c.polarity, c.level, c.id, c.packing)
        for c in build_tri_packing(r, rows, cols)
    ]


def pair_overlap_area(radius: float, distance: float) -> float:
    """Area shared by two circles of equal ``radius`` whose centers are ``distance`` apart."""
    if distance >= 2 * radius:
        return 0.0
    half = distance / 2
    return 2 * radius**2 * math.acos(half / radius) - distance * math.sqrt(radius**2 - half**2)
