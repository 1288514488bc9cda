import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lensworks import ca
from lensworks.ca import Block4, ChoiceStream, Grid, Phase, Rotation, RuleKind
from lensworks.errors import DimensionError, ReplayError

# frozen once from new_grid(64, 64, 0.3, seed=7)
PINNED_COUNT_64_03_SEED7 = 1228

ALL_RULES = list(RuleKind)


def grid_from(rows) -> Grid:
    a = np.array(rows, dtype=np.uint8)
    return Grid(a.shape[1], a.shape[0], a)


# ---------------------------------------------------------------- new_grid


def test_new_grid_zero_density_is_empty():
    g = ca.new_grid(4, 4, 0.0, seed=123)
    assert not g.cells.any()
    assert g.phase is Phase.EVEN


def test_new_grid_unit_density_is_full():
    g = ca.new_grid(4, 4, 1.0, seed=123)
    assert g.cells.all()


def test_new_grid_pinned_regression():
    g = ca.new_grid(64, 64, 0.3, seed=7)
    assert ca.particle_count(g) == PINNED_COUNT_64_03_SEED7
    assert ca.new_grid(64, 64, 0.3, seed=7).same_state(g)


@pytest.mark.parametrize("w,h", [(3, 4), (4, 5), (0, 4), (4, 0)])
def test_new_grid_rejects_bad_dimensions(w, h):
    with pytest.raises(DimensionError):
        ca.new_grid(w, h, 0.5, 1)


@pytest.mark.parametrize("density", [-0.1, 1.5])
def test_new_grid_rejects_bad_density(density):
    with pytest.raises(ValueError):
        ca.new_grid(4, 4, density, 1)


def test_seed_must_be_u64():
    with pytest.raises(ValueError):
        ca.new_grid(4, 4, 0.5, -1)
    with pytest.raises(ValueError):
        ca.new_grid(4, 4, 0.5, 2**64)


# ---------------------------------------------------------------- Block4 / rotate_block


def test_block_encoding_is_bijective():
    codes = [Block4.from_int(v).to_int() for v in range(16)]
    assert codes == list(range(16))
    assert Block4(1, 0, 0, 0).to_int() == 8
    assert Block4(0, 0, 0, 1).to_int() == 1


def test_rotate_block_fixed_points():
    for d in Rotation:
        assert ca.rotate_block(Block4(0, 0, 0, 0), d) == Block4(0, 0, 0, 0)
        assert ca.rotate_block(Block4(1, 1, 1, 1), d) == Block4(1, 1, 1, 1)


def test_rotate_block_cw_walks_the_ring():
    # nw -> ne -> se -> sw -> nw
    b = Block4(nw=1, ne=0, sw=0, se=0)
    b = ca.rotate_block(b, Rotation.CW)
    assert b == Block4(nw=0, ne=1, sw=0, se=0)
    b = ca.rotate_block(b, Rotation.CW)
    assert b == Block4(nw=0, ne=0, sw=0, se=1)
    b = ca.rotate_block(b, Rotation.CW)
    assert b == Block4(nw=0, ne=0, sw=1, se=0)
    b = ca.rotate_block(b, Rotation.CW)
    assert b == Block4(nw=1, ne=0, sw=0, se=0)


def test_rotate_block_cw_ccw_inverse_on_all_states():
    for v in range(16):
        b = Block4.from_int(v)
        assert ca.rotate_block(ca.rotate_block(b, Rotation.CW), Rotation.CCW) == b
        assert ca.rotate_block(ca.rotate_block(b, Rotation.CCW), Rotation.CW) == b


def test_rotate_block_order_four_and_bijective():
    for d in Rotation:
        images = set()
        for v in range(16):
            b = Block4.from_int(v)
            x = b
            for _ in range(4):
                x = ca.rotate_block(x, d)
            assert x == b
            images.add(ca.rotate_block(b, d))
        assert len(images) == 16


# ---------------------------------------------------------------- margolus_step


@pytest.mark.parametrize("rule", ALL_RULES)
def test_step_of_empty_grid(rule):
    g = ca.new_grid(6, 4, 0.0, 1)
    out = ca.margolus_step(g, rule, ChoiceStream(1))
    assert not out.cells.any()
    assert out.phase is Phase.ODD


def test_single_particle_always_cw_even_phase():
    g = grid_from(np.zeros((4, 4)))
    g.cells[0, 0] = 1  # (col 0, row 0)
    out = ca.margolus_step(g, RuleKind.ALWAYS_CW)
    assert out.cells[0, 1] == 1  # (col 1, row 0)
    assert ca.particle_count(out) == 1


def test_odd_phase_wraps_around_the_torus():
    # odd block anchored at (col 3, row 3) holds cells (3,3), (0,3), (3,0), (0,0)
    g = Grid(4, 4, np.zeros((4, 4)), Phase.ODD)
    g.cells[3, 3] = 1  # its nw
    out = ca.margolus_step(g, RuleKind.ALWAYS_CW)
    assert out.cells[3, 0] == 1  # ne: col 0, row 3
    out = ca.margolus_step(Grid(4, 4, out.cells, Phase.ODD), RuleKind.ALWAYS_CW)
    assert out.cells[0, 0] == 1  # se: col 0, row 0


def test_block_order_is_row_major_over_anchors():
    g = grid_from(np.zeros((4, 6)))
    g.cells[0, 2] = 1  # nw of the second block in the first block row
    stream = ChoiceStream(0, [np.array([0, 1, 0, 0, 0, 0], dtype=np.uint8)], position=0)
    out = ca.margolus_step(g, RuleKind.DIFFUSION, stream)
    # CCW: nw -> sw
    assert out.cells[1, 2] == 1


def test_diffusion_draws_one_choice_per_block():
    g = ca.new_grid(8, 6, 0.5, 3)
    stream = ChoiceStream(3)
    for _ in range(5):
        g = ca.margolus_step(g, RuleKind.DIFFUSION, stream)
    assert stream.steps == 5
    assert stream.offsets == [0, 12, 24, 36, 48, 60]


def test_deterministic_rules_consume_no_choices():
    g = ca.new_grid(8, 8, 0.5, 3)
    stream = ChoiceStream(3)
    for rule in (RuleKind.ALWAYS_CW, RuleKind.ALWAYS_CCW, RuleKind.ALTERNATE_BY_STEP):
        g = ca.margolus_step(g, rule, stream)
    assert len(stream.choices) == 0
    assert stream.steps == 3


def test_diffusion_requires_a_stream():
    with pytest.raises(ReplayError):
        ca.margolus_step(ca.new_grid(4, 4, 0.5, 1), RuleKind.DIFFUSION)


def test_conservation_64x64_diffusion_100_steps():
    g = ca.new_grid(64, 64, 0.3, seed=7)
    _, _, summary = ca.run(g, 100, RuleKind.DIFFUSION, seed=7)
    assert summary.counts == [PINNED_COUNT_64_03_SEED7] * 101


def test_conservation_over_1000_random_trajectories():
    master = np.random.default_rng(2024)
    for n in range(1000):
        w, h = 2 * int(master.integers(1, 6)), 2 * int(master.integers(1, 6))
        g = ca.new_grid(w, h, float(master.random()), int(master.integers(0, 2**63)))
        rule = ALL_RULES[n % len(ALL_RULES)]
        _, _, summary = ca.run(g, 100, rule, int(master.integers(0, 2**63)))
        assert summary.conserved, (n, w, h, rule)


# ---------------------------------------------------------------- unstep / run


def test_unstep_inverts_step_always_cw():
    g = ca.new_grid(4, 4, 0.5, 11)
    assert ca.margolus_unstep(ca.margolus_step(g, RuleKind.ALWAYS_CW), RuleKind.ALWAYS_CW).same_state(g)


def test_unstep_inverts_step_diffusion_64():
    g = ca.new_grid(64, 64, 0.3, 7)
    stream = ChoiceStream(7)
    back = ca.margolus_unstep(ca.margolus_step(g, RuleKind.DIFFUSION, stream), RuleKind.DIFFUSION, stream)
    assert back.same_state(g)


def test_unstep_empty_grid():
    g = Grid(4, 4, np.zeros((4, 4)), Phase.ODD)
    out = ca.margolus_unstep(g, RuleKind.ALWAYS_CCW)
    assert not out.cells.any()
    assert out.phase is Phase.EVEN


def test_unstep_on_exhausted_stream_raises():
    g = ca.new_grid(4, 4, 0.5, 1)
    with pytest.raises(ReplayError):
        ca.margolus_unstep(g, RuleKind.DIFFUSION, ChoiceStream(1))


def test_run_zero_steps():
    g = ca.new_grid(6, 6, 0.4, 5)
    out, stream, summary = ca.run(g, 0, RuleKind.DIFFUSION, 5)
    assert out.same_state(g)
    assert stream.steps == 0 and len(stream.choices) == 0
    assert summary.counts == [ca.particle_count(g)]


def test_run_is_deterministic_and_round_trips():
    g = ca.new_grid(16, 12, 0.4, 9)
    a, sa, ta = ca.run(g, 50, RuleKind.DIFFUSION, 99)
    b, sb, tb = ca.run(g, 50, RuleKind.DIFFUSION, 99)
    assert a.same_state(b)
    assert np.array_equal(sa.choices, sb.choices)
    assert ta == tb
    assert ta.final_phase is Phase.EVEN
    assert ca.run_backward(a, RuleKind.DIFFUSION, sa).same_state(g)


def test_stream_replays_forward_bit_for_bit():
    g = ca.new_grid(16, 16, 0.4, 9)
    final, stream, _ = ca.run(g, 30, RuleKind.DIFFUSION, 1)
    replay = ChoiceStream(stream.seed, stream.segments, position=0)
    h = g
    for _ in range(30):
        h = ca.margolus_step(h, RuleKind.DIFFUSION, replay)
    assert h.same_state(final)


def test_stream_continues_after_reload():
    g = ca.new_grid(8, 8, 0.4, 9)
    full, _, _ = ca.run(g, 10, RuleKind.DIFFUSION, 4)
    half, stream, _ = ca.run(g, 5, RuleKind.DIFFUSION, 4)
    reloaded = ChoiceStream(stream.seed, stream.segments)
    for _ in range(5):
        half = ca.margolus_step(half, RuleKind.DIFFUSION, reloaded)
    assert half.same_state(full)


# ---------------------------------------------------------------- properties


grids = st.builds(
    lambda w, h, d, s: ca.new_grid(2 * w, 2 * h, d, s),
    st.integers(1, 6),
    st.integers(1, 6),
    st.floats(0, 1),
    st.integers(0, 2**64 - 1),
)


@settings(max_examples=60, deadline=None)
@given(g=grids, rule=st.sampled_from(ALL_RULES), steps=st.integers(0, 40), seed=st.integers(0, 2**64 - 1))
def test_reversibility_property(g, rule, steps, seed):
    out, stream, summary = ca.run(g, steps, rule, seed)
    assert ca.run_backward(out, rule, stream).same_state(g)
    assert summary.conserved
    assert out.phase == Phase(int(g.phase) ^ (steps % 2))


@settings(max_examples=60, deadline=None)
@given(g=grids, seed=st.integers(0, 2**32), data=st.data())
def test_block_locality(g, seed, data):
    nblocks = g.blocks_per_step
    rng = np.random.default_rng(seed)
    base = rng.integers(0, 2, nblocks).astype(np.uint8)
    flip = data.draw(st.integers(0, nblocks - 1))
    other = base.copy()
    other[flip] ^= 1
    phase = data.draw(st.sampled_from(list(Phase)))
    g = Grid(g.width, g.height, g.cells, phase)
    a = ca.margolus_step(g, RuleKind.DIFFUSION, ChoiceStream(0, [base], position=0))
    b = ca.margolus_step(g, RuleKind.DIFFUSION, ChoiceStream(0, [other], position=0))
    j, i = divmod(flip, g.width // 2)
    off = int(phase)
    block_cells = {((2 * j + dr + off) % g.height, (2 * i + dc + off) % g.width) for dr in (0, 1) for dc in (0, 1)}
    for row, col in zip(*np.nonzero(a.cells != b.cells)):
        assert (row, col) in block_cells


def test_alternate_rule_is_cw_then_ccw():
    g = ca.new_grid(8, 8, 0.5, 2)
    alt = ca.margolus_step(ca.margolus_step(g, RuleKind.ALTERNATE_BY_STEP), RuleKind.ALTERNATE_BY_STEP)
    manual = ca.margolus_step(ca.margolus_step(g, RuleKind.ALWAYS_CW), RuleKind.ALWAYS_CCW)
    assert alt.same_state(manual)


# ---------------------------------------------------------------- persistence


def test_grid_json_round_trip():
    g = ca.new_grid(6, 4, 0.5, 17)
    d = g.to_dict()
    assert set(d) == {"width", "height", "phase", "cells", "generator", "seed"}
    assert d["generator"] == "numpy.PCG64" and d["seed"] == 17
    assert len(d["cells"]) == 4 and len(d["cells"][0]) == 6
    back = Grid.from_dict(d)
    assert back.same_state(g) and back.seed == 17


def test_choice_stream_file_round_trip(tmp_path):
    g = ca.new_grid(10, 6, 0.5, 3)
    _, stream, _ = ca.run(g, 7, RuleKind.DIFFUSION, 2**63 + 5)
    path = tmp_path / "s.lwcs"
    ca.write_choice_stream(path, stream)
    raw = path.read_bytes()
    assert raw[:4] == b"LWCS"
    assert int.from_bytes(raw[4:8], "little") == 1
    assert int.from_bytes(raw[8:16], "little") == 2**63 + 5
    assert int.from_bytes(raw[16:24], "little") == 7
    assert len(raw) == 24 + (7 * 15 + 7) // 8
    back = ca.read_choice_stream(path, 15)
    assert back.seed == stream.seed and back.position == 7
    assert np.array_equal(back.choices, stream.choices)


def test_choice_stream_bit_order(tmp_path):
    # first choice lands in the least significant bit; 1 = CCW
    s = ChoiceStream(0, [np.array([1, 0, 0, 0, 0, 0, 0, 0, 1], dtype=np.uint8)])
    ca.write_choice_stream(tmp_path / "x", s)
    assert (tmp_path / "x").read_bytes()[24:] == bytes([0b00000001, 0b00000001])


def test_truncated_stream_file(tmp_path):
    g = ca.new_grid(8, 8, 0.5, 3)
    _, stream, _ = ca.run(g, 4, RuleKind.DIFFUSION, 1)
    path = tmp_path / "s.lwcs"
    ca.write_choice_stream(path, stream)
    path.write_bytes(path.read_bytes()[:-1])
    with pytest.raises(ReplayError):
        ca.read_choice_stream(path, 16)
    path.write_bytes(b"LW")
    with pytest.raises(ReplayError):
        ca.read_choice_stream(path, 16)
