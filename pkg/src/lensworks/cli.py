"""lensworks command line: simulate, reverse, generate, verify, rerun.

Exit codes: 0 success, 1 verification failed, 2 usage, 3 I/O, 4 replay,
5 resource cap. Every command prints its fully resolved configuration and
embeds it in the files it writes; ``lensworks rerun FILE`` executes that
embedded configuration again.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from lensworks import ca, fractal, render, surface, verify
from lensworks.errors import ReplayError, ResourceError
from lensworks.geometry import Circle, Rect

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO, EXIT_REPLAY, EXIT_RESOURCE = 0, 1, 2, 3, 4, 5


class UsageError(Exception):
    pass


class InputError(OSError):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def _write_json(path: str, obj) -> None:
    Path(path).write_text(_dump(obj), encoding="utf-8")


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON ({exc})") from exc


def _load_grid(path: str) -> ca.Grid:
    try:
        return ca.Grid.from_dict(_read_json(path))
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _log_config(cfg: dict) -> None:
    print("config " + json.dumps(cfg, sort_keys=True), flush=True)


# ---------------------------------------------------------------- simulate / reverse


def cmd_simulate(cfg: dict) -> int:
    rule = ca.RuleKind(cfg["rule"])
    if cfg["steps"] < 0:
        raise UsageError("--steps must be >= 0")
    if cfg["init"]:
        g0 = _load_grid(cfg["init"])
    else:
        g0 = ca.new_grid(cfg["width"], cfg["height"], cfg["density"], cfg["seed"])
    if cfg["initial_out"]:
        _write_json(cfg["initial_out"], {**g0.to_dict(), "config": cfg})
    frames = Path(cfg["frames"]) if cfg["frames"] else None
    if frames:
        frames.mkdir(parents=True, exist_ok=True)

    stream = ca.ChoiceStream(cfg["seed"])
    g = g0
    print("step\tparticles")
    print(f"0\t{ca.particle_count(g)}")
    for step in range(1, cfg["steps"] + 1):
        if frames:
            _write_frame(frames, step - 1, g, cfg)
        g = ca.margolus_step(g, rule, stream)
        print(f"{step}\t{ca.particle_count(g)}")
    if frames:
        _write_frame(frames, cfg["steps"], g, cfg)
    _write_json(cfg["out"], {**g.to_dict(), "config": cfg})
    ca.write_choice_stream(cfg["stream"], stream)
    return EXIT_OK


def _write_frame(frames: Path, step: int, g: ca.Grid, cfg: dict) -> None:
    scene = render.scene_from_cells(g.cells)
    scene.metadata = {"config": cfg, "step": step, "phase": g.phase.name.lower()}
    render.write_svg(scene, frames / f"step_{step:05d}.svg")


def cmd_reverse(cfg: dict) -> int:
    record = _read_json(cfg["grid"])
    try:
        g = ca.Grid.from_dict(record)
    except ValueError as exc:
        raise InputError(f"{cfg['grid']}: {exc}") from exc
    rule_name = cfg["rule"] or (record.get("config") or {}).get("rule")
    if rule_name is None:
        raise UsageError("rule unknown: pass --rule (the grid file carries no config)")
    rule = ca.RuleKind(rule_name)
    per_step = g.blocks_per_step if rule.consumes_choices else 0
    stream = ca.read_choice_stream(cfg["stream"], per_step)
    steps = stream.steps if cfg["steps"] is None else cfg["steps"]
    if steps < 0:
        raise UsageError("--steps must be >= 0")
    print("step\tparticles")
    print(f"{stream.position}\t{ca.particle_count(g)}")
    for _ in range(steps):
        g = ca.margolus_unstep(g, rule, stream)
        print(f"{stream.position}\t{ca.particle_count(g)}")
    if cfg["out"]:
        _write_json(cfg["out"], {**g.to_dict(), "config": cfg})
    if cfg["expect"]:
        expected = _load_grid(cfg["expect"])
        if not g.same_state(expected):
            print(f"mismatch: reversed grid differs from {cfg['expect']}", file=sys.stderr)
            return EXIT_FAIL
        print(f"match: reversed grid equals {cfg['expect']}")
    return EXIT_OK


# ---------------------------------------------------------------- generate


def _circles_output(cfg: dict, circles: list[Circle], extra: dict | None = None) -> None:
    if cfg["scene"]:
        _write_json(cfg["scene"], {"circles": [c.to_dict() for c in circles], "lenses": [], "config": cfg, **(extra or {})})
    if cfg["svg"]:
        scene = render.scene_from_circles(circles)
        scene.metadata = {"config": cfg}
        render.write_svg(scene, cfg["svg"])


def cmd_generate(cfg: dict) -> int:
    kind = cfg["kind"]
    r = cfg["radius"]
    if not r > 0:
        raise UsageError("--radius must be positive")
    if kind == "athena":
        fractal.check_curve_size(cfg["iterations"], cfg["allow_large"])
        curve = fractal.athena_curve(Circle((0.0, 0.0), r, cfg["polarity"]), cfg["iterations"], cfg["allow_large"])
        m = fractal.measures(curve)
        report = {
            "circles": m.count,
            "total_area": m.total_area,
            "total_length": m.total_length,
            "area_law": fractal.athena_area_law(r, cfg["iterations"]),
            "length_law": fractal.athena_length_law(r, cfg["iterations"]),
        }
        print("measures " + json.dumps(report, sort_keys=True))
        if cfg["report"]:
            _write_json(cfg["report"], {**report, "config": cfg})
        if cfg["scene"] or cfg["svg"]:
            _circles_output(cfg, curve.circles)
        return EXIT_OK
    if kind == "fractal-t":
        window = Rect(*cfg["window"])
        levels = fractal.fractal_t(cfg["levels"], window, r)
        print("levels " + json.dumps([len(lv) for lv in levels]))
        _circles_output(cfg, [c for lv in levels for c in lv.circles])
        return EXIT_OK
    if kind == "square":
        s = surface.build_square2_surface(r, cfg["bw"], cfg["bh"])
        if cfg["grid"]:
            g = _load_grid(cfg["grid"])
            if g.cells.shape != s.values.shape:
                raise UsageError(f"grid is {g.width}x{g.height}, surface needs {2 * cfg['bw']}x{2 * cfg['bh']}")
            s = surface.SurfaceState(s.lattice, g.cells.copy())
        if cfg["scene"]:
            _write_json(cfg["scene"], {**s.to_scene_dict(), "config": cfg})
        if cfg["svg"]:
            scene = render.scene_from_surface(s)
            scene.metadata = {"config": cfg}
            render.write_svg(scene, cfg["svg"])
        print(f"lenses {s.lattice.lens_count}")
        return EXIT_OK
    if kind == "tri":
        circles = surface.build_tri_packing(r, cfg["rows"], cfg["cols"])
    else:
        variant = surface.VariantKind.DOUBLED if cfg["factor"] is None else surface.VariantKind.EXTENDED
        circles = surface.build_variant_packing(variant, r, cfg["rows"], cfg["cols"], cfg["factor"])
    print(f"circles {len(circles)}")
    _circles_output(cfg, circles)
    return EXIT_OK


# ---------------------------------------------------------------- verify


def cmd_verify(cfg: dict) -> int:
    rep = verify.run_suite(cfg["suite"], cfg["seed"])
    print(_dump(rep), end="")
    if cfg["report"]:
        _write_json(cfg["report"], {**rep, "config": cfg})
    print(f"{cfg['suite']}: {'PASS' if rep['pass'] else 'FAIL'}")
    return EXIT_OK if rep["pass"] else EXIT_FAIL


def cmd_rerun(cfg: dict) -> int:
    path = cfg["file"]
    if path.endswith(".svg"):
        try:
            embedded = render.read_svg_metadata(path).get("config")
        except ValueError as exc:
            raise InputError(str(exc)) from exc
    else:
        embedded = _read_json(path).get("config")
    if not embedded or embedded.get("command") not in HANDLERS or embedded["command"] == "rerun":
        raise InputError(f"{path}: no embedded command configuration")
    return dispatch(embedded)


HANDLERS = {
    "simulate": cmd_simulate,
    "reverse": cmd_reverse,
    "generate": cmd_generate,
    "verify": cmd_verify,
    "rerun": cmd_rerun,
}


def dispatch(cfg: dict) -> int:
    _log_config(cfg)
    return HANDLERS[cfg["command"]](cfg)


# ---------------------------------------------------------------- argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lensworks", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the Margolus block automaton")
    sim.add_argument("--width", type=int, default=64)
    sim.add_argument("--height", type=int, default=64)
    sim.add_argument("--steps", type=int, default=100)
    sim.add_argument("--density", type=float, default=0.3)
    sim.add_argument("--seed", type=int, default=verify.DEFAULT_SEED)
    sim.add_argument("--rule", choices=[k.value for k in ca.RuleKind], default="diffusion")
    sim.add_argument("--init", help="start from this grid JSON instead of a random grid")
    sim.add_argument("--out", default="final.json", help="final grid JSON")
    sim.add_argument("--stream", default="choices.lwcs", help="choice-stream file")
    sim.add_argument("--initial-out", help="also write the initial grid JSON here")
    sim.add_argument("--frames", help="directory for per-step SVG frames")

    rev = sub.add_parser("reverse", help="replay a choice stream backwards")
    rev.add_argument("--grid", default="final.json")
    rev.add_argument("--stream", default="choices.lwcs")
    rev.add_argument("--rule", choices=[k.value for k in ca.RuleKind])
    rev.add_argument("--steps", type=int, help="steps to undo (default: all recorded)")
    rev.add_argument("--out", default="reversed.json")
    rev.add_argument("--expect", help="grid JSON the reversed state must equal")

    gen = sub.add_parser("generate", help="build packings and fractals, write scene JSON / SVG")
    gen.add_argument("kind", choices=["athena", "fractal-t", "square", "tri", "variant"])
    gen.add_argument("--radius", type=float, default=1.0)
    gen.add_argument("--iterations", type=int, default=4)
    gen.add_argument("--polarity", type=float, default=surface.BASE_POLARITY)
    gen.add_argument("--levels", type=int, default=3)
    gen.add_argument("--window", type=float, nargs=4, default=[0.0, 0.0, 12.0, 10.0], metavar=("X0", "Y0", "X1", "Y1"))
    gen.add_argument("--rows", type=int, default=6)
    gen.add_argument("--cols", type=int, default=6)
    gen.add_argument("--bw", type=int, default=4)
    gen.add_argument("--bh", type=int, default=4)
    gen.add_argument("--factor", type=float, help="radius factor for 'variant' (omit for doubled radii)")
    gen.add_argument("--grid", help="lens values for 'square' taken from this grid JSON")
    gen.add_argument("--svg")
    gen.add_argument("--scene")
    gen.add_argument("--report")
    gen.add_argument("--allow-large", action="store_true", help="lift the 3^x <= 2^24 circle cap")

    ver = sub.add_parser("verify", help="run a named verification suite")
    ver.add_argument("suite", choices=sorted(verify.SUITES))
    ver.add_argument("--seed", type=int)
    ver.add_argument("--report")

    rr = sub.add_parser("rerun", help="execute the configuration embedded in an output file")
    rr.add_argument("file")
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    cfg = vars(args)
    try:
        return dispatch(cfg)
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ReplayError as exc:
        print(f"replay error: {exc}", file=sys.stderr)
        return EXIT_REPLAY
    except ResourceError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
