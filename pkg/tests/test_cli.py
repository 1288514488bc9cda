import json

import pytest

from lensworks import ca
from lensworks.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def counts(stdout):
    rows = [line.split("\t") for line in stdout.splitlines() if "\t" in line and line[0].isdigit()]
    return [int(n) for _, n in rows]


def test_simulate_conserves_particles(tmp_path, capsys):
    code, out, _ = run(
        capsys, "simulate", "--width", 16, "--height", 8, "--steps", 20,
        "--out", tmp_path / "g.json", "--stream", tmp_path / "s.lwcs",
    )
    assert code == 0
    col = counts(out)
    assert len(col) == 21 and len(set(col)) == 1
    assert out.startswith("config {")
    saved = json.loads((tmp_path / "g.json").read_text())
    assert saved["config"]["steps"] == 20


def test_simulate_zero_steps_keeps_initial_grid(tmp_path, capsys):
    code, _, _ = run(
        capsys, "simulate", "--width", 8, "--height", 8, "--steps", 0, "--initial-out", tmp_path / "i.json",
        "--out", tmp_path / "g.json", "--stream", tmp_path / "s.lwcs",
    )
    assert code == 0
    a = ca.Grid.from_dict(json.loads((tmp_path / "i.json").read_text()))
    b = ca.Grid.from_dict(json.loads((tmp_path / "g.json").read_text()))
    assert a.same_state(b)


def test_simulate_odd_width(tmp_path, capsys):
    code, _, err = run(capsys, "simulate", "--width", 7, "--out", tmp_path / "g.json", "--stream", tmp_path / "s")
    assert code == 2 and "error" in err


@pytest.mark.parametrize("rule", ["diffusion", "alternate"])
def test_reverse_restores_initial_grid(tmp_path, capsys, rule):
    args = ["--out", tmp_path / "g.json", "--stream", tmp_path / "s.lwcs", "--initial-out", tmp_path / "i.json"]
    assert run(capsys, "simulate", "--width", 12, "--height", 10, "--steps", 30, "--rule", rule, *args)[0] == 0
    code, out, _ = run(
        capsys, "reverse", "--grid", tmp_path / "g.json", "--stream", tmp_path / "s.lwcs",
        "--out", tmp_path / "r.json", "--expect", tmp_path / "i.json",
    )
    assert code == 0 and "match" in out
    assert counts(out)[-1] == counts(out)[0]


def test_reverse_truncated_stream(tmp_path, capsys):
    run(capsys, "simulate", "--width", 8, "--height", 8, "--steps", 5, "--out", tmp_path / "g.json", "--stream", tmp_path / "s.lwcs")
    data = (tmp_path / "s.lwcs").read_bytes()
    (tmp_path / "s.lwcs").write_bytes(data[:-2])
    code, _, err = run(capsys, "reverse", "--grid", tmp_path / "g.json", "--stream", tmp_path / "s.lwcs", "--out", "")
    assert code == 4 and "replay" in err


def test_reverse_missing_grid(tmp_path, capsys):
    assert run(capsys, "reverse", "--grid", tmp_path / "none.json")[0] == 3


def test_athena_cap(capsys):
    code, _, err = run(capsys, "generate", "athena", "--iterations", 30)
    assert code == 5 and "cap" in err


def test_generate_athena_svg(tmp_path, capsys):
    code, out, _ = run(capsys, "generate", "athena", "--iterations", 11, "--svg", tmp_path / "a.svg", "--report", tmp_path / "m.json")
    assert code == 0
    assert (tmp_path / "a.svg").read_text().count("<circle ") == 177147
    report = json.loads((tmp_path / "m.json").read_text())
    assert report["circles"] == 177147
    assert report["total_length"] == pytest.approx(report["length_law"], rel=1e-9)


def test_generate_fractal_t(tmp_path, capsys):
    code, out, _ = run(capsys, "generate", "fractal-t", "--levels", 3, "--window", 0, 0, 6, 5, "--svg", tmp_path / "t.svg")
    assert code == 0
    assert (tmp_path / "t.svg").read_text().count("<g ") == 4


def test_generate_square_from_grid(tmp_path, capsys):
    run(capsys, "simulate", "--width", 8, "--height", 6, "--steps", 3, "--out", tmp_path / "g.json", "--stream", tmp_path / "s")
    code, out, _ = run(
        capsys, "generate", "square", "--bw", 4, "--bh", 3, "--grid", tmp_path / "g.json", "--scene", tmp_path / "sc.json",
    )
    assert code == 0 and "lenses 48" in out
    scene = json.loads((tmp_path / "sc.json").read_text())
    grid = json.loads((tmp_path / "g.json").read_text())
    assert sum(x["value"] for x in scene["lenses"]) == sum(map(sum, grid["cells"]))


def test_generate_square_shape_mismatch(tmp_path, capsys):
    run(capsys, "simulate", "--width", 8, "--height", 6, "--steps", 0, "--out", tmp_path / "g.json", "--stream", tmp_path / "s")
    assert run(capsys, "generate", "square", "--bw", 2, "--bh", 2, "--grid", tmp_path / "g.json")[0] == 2


@pytest.mark.parametrize("suite", ["equivalence", "area", "omega-t"])
def test_verify_suites_pass(capsys, suite):
    code, out, _ = run(capsys, "verify", suite)
    assert code == 0 and out.rstrip().endswith("PASS")


def test_verify_unknown_suite(capsys):
    assert run(capsys, "verify", "nonsense")[0] == 2


def test_write_into_missing_directory(tmp_path, capsys):
    code, _, err = run(capsys, "generate", "tri", "--svg", tmp_path / "missing" / "x.svg")
    assert code == 3 and "I/O" in err


def test_rerun_reproduces_bytes(tmp_path, capsys):
    svg = tmp_path / "v.svg"
    run(capsys, "generate", "variant", "--factor", 1.2, "--rows", 3, "--cols", 4, "--svg", svg)
    first = svg.read_bytes()
    copy = tmp_path / "copy.svg"
    copy.write_bytes(first)
    svg.unlink()
    assert run(capsys, "rerun", copy)[0] == 0
    assert svg.read_bytes() == first


def test_rerun_missing_file(tmp_path, capsys):
    assert run(capsys, "rerun", tmp_path / "gone.svg")[0] == 3


def test_rerun_without_config(tmp_path, capsys):
    (tmp_path / "x.json").write_text("{}")
    assert run(capsys, "rerun", tmp_path / "x.json")[0] == 3
