"""Margolus-partitioned block cellular automaton on a torus.

Cells live in a ``(height, width)`` uint8 array indexed ``cells[row, col]``
with rows growing downward (screen coordinates). Each step partitions the
grid into 2x2 blocks, anchored at even ``(col, row)`` in the Even phase and
at odd ``(col, row)`` in the Odd phase, and rotates every block by a quarter
turn. The partition wraps around the edges, so every cell belongs to exactly
one block in either phase.

Rotation convention, shared by every module: CW moves the value at nw to ne,
ne to se, se to sw and sw to nw. CCW is the inverse.

Randomness comes from numpy's PCG64 seeded through a ``SeedSequence`` with a
per-purpose spawn key, so a ``(seed, purpose)`` pair always yields the same
bits regardless of numpy's global state.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from lensworks.errors import DimensionError, ReplayError

GENERATOR_NAME = "numpy.PCG64"

# spawn keys keep the initial-state draw and the choice draws independent
_PURPOSE_CELLS = 0
_PURPOSE_CHOICES = 1

STREAM_MAGIC = b"LWCS"
STREAM_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


def make_rng(seed: int, purpose: int) -> np.random.Generator:
    check_seed(seed)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(purpose,))))


def check_seed(seed: int) -> None:
    if not isinstance(seed, (int, np.integer)) or not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed!r}")


class Phase(enum.IntEnum):
    EVEN = 0
    ODD = 1

    def flipped(self) -> "Phase":
        return Phase(1 - self)


class Rotation(enum.IntEnum):
    # values double as the bit written to choice-stream files
    CW = 0
    CCW = 1

    def inverse(self) -> "Rotation":
        return Rotation(1 - self)


class RuleKind(enum.Enum):
    DIFFUSION = "diffusion"
    ALWAYS_CW = "cw"
    ALWAYS_CCW = "ccw"
    # CW for steps applied from the Even phase, CCW from the Odd phase
    ALTERNATE_BY_STEP = "alternate"

    @property
    def consumes_choices(self) -> bool:
        return self is RuleKind.DIFFUSION


class Block4(NamedTuple):
    nw: int
    ne: int
    sw: int
    se: int

    def to_int(self) -> int:
        """Encode as 0..15 with nw as bit 3, ne bit 2, sw bit 1, se bit 0."""
        return (self.nw << 3) | (self.ne << 2) | (self.sw << 1) | self.se

    @classmethod
    def from_int(cls, value: int) -> "Block4":
        if not 0 <= value < 16:
            raise ValueError(f"block code must be in 0..15, got {value}")
        return cls((value >> 3) & 1, (value >> 2) & 1, (value >> 1) & 1, value & 1)


def rotate_block(b: Block4, direction: Rotation) -> Block4:
    if direction is Rotation.CW:
        return Block4(nw=b.sw, ne=b.nw, sw=b.se, se=b.ne)
    return Block4(nw=b.ne, ne=b.se, sw=b.nw, se=b.sw)


@dataclass
class Grid:
    width: int
    height: int
    cells: np.ndarray
    phase: Phase = Phase.EVEN
    seed: int | None = None
    generator: str = GENERATOR_NAME

    def __post_init__(self):
        check_dimensions(self.width, self.height)
        self.cells = np.asarray(self.cells, dtype=np.uint8)
        if self.cells.shape != (self.height, self.width):
            raise DimensionError(
                f"cells have shape {self.cells.shape}, expected {(self.height, self.width)}"
            )
        if self.cells.size and self.cells.max() > 1:
            raise ValueError("cells must hold 0 or 1")
        self.phase = Phase(self.phase)

    @property
    def blocks_per_step(self) -> int:
        return (self.width // 2) * (self.height // 2)

    def copy(self) -> "Grid":
        return Grid(self.width, self.height, self.cells.copy(), self.phase, self.seed, self.generator)

    def same_state(self, other: "Grid") -> bool:
        return self.phase == other.phase and np.array_equal(self.cells, other.cells)

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "phase": self.phase.name.lower(),
            "cells": self.cells.tolist(),
            "generator": self.generator,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Grid":
        try:
            phase = Phase[str(data["phase"]).upper()]
            return cls(
                width=int(data["width"]),
                height=int(data["height"]),
                cells=np.array(data["cells"], dtype=np.int64).reshape(int(data["height"]), int(data["width"])),
                phase=phase,
                seed=data.get("seed"),
                generator=data.get("generator", GENERATOR_NAME),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed grid record: {exc}") from exc


def check_dimensions(width: int, height: int) -> None:
    if width < 2 or height < 2 or width % 2 or height % 2:
        raise DimensionError(f"grid dimensions must be even and >= 2, got {width}x{height}")


def new_grid(width: int, height: int, density: float, seed: int) -> Grid:
    check_dimensions(width, height)
    if not 0.0 <= density <= 1.0:
        raise ValueError(f"density must lie in [0, 1], got {density}")
    rng = make_rng(seed, _PURPOSE_CELLS)
    cells = (rng.random((height, width)) < density).astype(np.uint8)
    return Grid(width, height, cells, Phase.EVEN, seed=seed)


def particle_count(g: Grid) -> int:
    return int(g.cells.sum(dtype=np.int64))


class ChoiceStream:
    """Per-step record of the CW/CCW choice drawn for every block.

    The stream behaves like a tape with a cursor. Forward steps either replay
    the segment under the cursor or, at the end of the tape, draw a fresh one;
    backward steps consume the segment just before the cursor.
    """

    def __init__(self, seed: int, segments: Sequence[np.ndarray] = (), position: int | None = None):
        check_seed(seed)
        self.seed = int(seed)
        self.segments: list[np.ndarray] = [np.asarray(s, dtype=np.uint8) for s in segments]
        self.position = len(self.segments) if position is None else position
        if not 0 <= self.position <= len(self.segments):
            raise ValueError("stream position outside the recorded steps")
        self._rng: np.random.Generator | None = None

    @property
    def steps(self) -> int:
        return len(self.segments)

    @property
    def offsets(self) -> list[int]:
        out = [0]
        for seg in self.segments:
            out.append(out[-1] + len(seg))
        return out

    @property
    def choices(self) -> np.ndarray:
        if not self.segments:
            return np.zeros(0, dtype=np.uint8)
        return np.concatenate(self.segments)

    def rewind(self) -> "ChoiceStream":
        self.position = 0
        return self

    def _fresh(self, n: int) -> np.ndarray:
        if self._rng is None:
            self._rng = make_rng(self.seed, _PURPOSE_CHOICES)
            # bring the generator level with choices recorded before it existed
            for seg in self.segments:
                if len(seg):
                    self._rng.integers(0, 2, size=len(seg), dtype=np.uint8)
        if n == 0:
            return np.zeros(0, dtype=np.uint8)
        return self._rng.integers(0, 2, size=n, dtype=np.uint8)

    def forward(self, n: int) -> np.ndarray:
        """Segment for the next forward step: replayed if recorded, else drawn."""
        if self.position < len(self.segments):
            seg = self.segments[self.position]
            if len(seg) != n:
                raise ReplayError(f"recorded segment has {len(seg)} choices, step needs {n}")
        else:
            seg = self._fresh(n)
            self.segments.append(seg)
        self.position += 1
        return seg

    def backward(self, n: int) -> np.ndarray:
        if self.position == 0:
            raise ReplayError("choice stream exhausted: no recorded step left to undo")
        seg = self.segments[self.position - 1]
        if len(seg) != n:
            raise ReplayError(f"recorded segment has {len(seg)} choices, step needs {n}")
        self.position -= 1
        return seg


def _ccw_mask(g: Grid, rule: RuleKind, phase: Phase, segment: np.ndarray | None) -> np.ndarray:
    shape = (g.height // 2, g.width // 2)
    if rule is RuleKind.DIFFUSION:
        return segment.reshape(shape).astype(bool)
    if rule is RuleKind.ALWAYS_CW:
        ccw = False
    elif rule is RuleKind.ALWAYS_CCW:
        ccw = True
    else:
        ccw = phase is Phase.ODD
    return np.full(shape, ccw)


def _rotate_even_blocks(cells: np.ndarray, ccw: np.ndarray) -> np.ndarray:
    nw, ne = cells[0::2, 0::2], cells[0::2, 1::2]
    sw, se = cells[1::2, 0::2], cells[1::2, 1::2]
    out = np.empty_like(cells)
    out[0::2, 0::2] = np.where(ccw, ne, sw)
    out[0::2, 1::2] = np.where(ccw, se, nw)
    out[1::2, 1::2] = np.where(ccw, sw, ne)
    out[1::2, 0::2] = np.where(ccw, nw, se)
    return out


def apply_blocks(cells: np.ndarray, phase: Phase, ccw: np.ndarray) -> np.ndarray:
    """Rotate every block of ``phase``'s partition; ``ccw`` is row-major over anchors."""
    if phase is Phase.EVEN:
        return _rotate_even_blocks(cells, ccw)
    shifted = np.roll(cells, (-1, -1), axis=(0, 1))
    return np.roll(_rotate_even_blocks(shifted, ccw), (1, 1), axis=(0, 1))


def margolus_step(g: Grid, rule: RuleKind, stream: ChoiceStream | None = None) -> Grid:
    segment = None
    if rule.consumes_choices:
        if stream is None:
            raise ReplayError("the diffusion rule needs a choice stream")
        segment = stream.forward(g.blocks_per_step)
    elif stream is not None:
        # keep step boundaries aligned for deterministic rules too
        stream.forward(0)
    ccw = _ccw_mask(g, rule, g.phase, segment)
    out = g.copy()
    out.cells = apply_blocks(g.cells, g.phase, ccw)
    out.phase = g.phase.flipped()
    return out


def margolus_unstep(g: Grid, rule: RuleKind, stream: ChoiceStream | None = None) -> Grid:
    step_phase = g.phase.flipped()
    segment = None
    if rule.consumes_choices:
        if stream is None:
            raise ReplayError("the diffusion rule needs a choice stream")
        segment = stream.backward(g.blocks_per_step)
    elif stream is not None:
        stream.backward(0)
    ccw = _ccw_mask(g, rule, step_phase, segment)
    out = g.copy()
    out.cells = apply_blocks(g.cells, step_phase, ~ccw)
    out.phase = step_phase
    return out


@dataclass
class Trajectory:
    counts: list[int] = field(default_factory=list)
    final_phase: Phase = Phase.EVEN

    @property
    def conserved(self) -> bool:
        return len(set(self.counts)) <= 1


def run(g: Grid, steps: int, rule: RuleKind, seed: int) -> tuple[Grid, ChoiceStream, Trajectory]:
    if steps < 0:
        raise ValueError("steps must be >= 0")
    stream = ChoiceStream(seed)
    summary = Trajectory(counts=[particle_count(g)])
    for _ in range(steps):
        g = margolus_step(g, rule, stream)
        summary.counts.append(particle_count(g))
    summary.final_phase = g.phase
    return g, stream, summary


def run_backward(g: Grid, rule: RuleKind, stream: ChoiceStream, steps: int | None = None) -> Grid:
    """Undo ``steps`` steps (default: everything before the stream cursor)."""
    n = stream.position if steps is None else steps
    for _ in range(n):
        g = margolus_unstep(g, rule, stream)
    return g


def write_choice_stream(path: str | Path, stream: ChoiceStream) -> None:
    bits = stream.choices
    payload = np.packbits(bits, bitorder="little").tobytes() if len(bits) else b""
    header = _HEADER.pack(STREAM_MAGIC, STREAM_VERSION, stream.seed, stream.steps)
    Path(path).write_bytes(header + payload)


def read_choice_stream(path: str | Path, blocks_per_step: int) -> ChoiceStream:
    """Load a stream whose steps each carry ``blocks_per_step`` choices (0 for deterministic rules).

    The cursor is placed at the end, ready for backward replay.
    """
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ReplayError(f"{path}: truncated choice-stream header")
    magic, version, seed, steps = _HEADER.unpack_from(data)
    if magic != STREAM_MAGIC:
        raise ReplayError(f"{path}: not a choice-stream file")
    if version != STREAM_VERSION:
        raise ReplayError(f"{path}: unsupported choice-stream version {version}")
    nbits = steps * blocks_per_step
    payload = data[_HEADER.size:]
    if len(payload) * 8 < nbits:
        raise ReplayError(f"{path}: stream holds {len(payload) * 8} bits, {nbits} needed")
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8), bitorder="little")[:nbits]
    segments = [bits[i * blocks_per_step:(i + 1) * blocks_per_step] for i in range(steps)]
    return ChoiceStream(seed, segments)
