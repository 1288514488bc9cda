"""Margolus block automata as circle rotations, and the fractal packings
built from shrinking and turning a triangular circle packing."""

from lensworks.ca import (
    Block4,
    ChoiceStream,
    Grid,
    Phase,
    Rotation,
    RuleKind,
    margolus_step,
    margolus_unstep,
    new_grid,
    particle_count,
    rotate_block,
    run,
)
from lensworks.geometry import Circle, Rect

__version__ = "0.1.0"
