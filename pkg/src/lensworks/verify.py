"""Named verification suites run by ``lensworks verify``.

Each suite returns a report ``{check, pass, details, tolerances, seed}``.
Defaults are sized to finish in well under a minute on a laptop.
"""

from __future__ import annotations

import math

import numpy as np

from lensworks import ca, fractal, surface
from lensworks.geometry import SQRT3, Circle, Rect, overlap_report, overlap_report_bruteforce

DEFAULT_SEED = 7
OMEGA_WINDOW = Rect(0.0, 0.0, 10.0, 5 * SQRT3)
SYMMETRY_WINDOW = Rect(0.0, 0.0, 14.0, 12.0)


def _report(check: str, ok: bool, details: dict, tolerances: dict, seed: int | None = None) -> dict:
    return {"check": check, "pass": bool(ok), "details": details, "tolerances": tolerances, "seed": seed}


def reversibility(seed: int = DEFAULT_SEED, size: int = 64, density: float = 0.3, steps: int = 1000) -> dict:
    g0 = ca.new_grid(size, size, density, seed)
    g, stream, _ = ca.run(g0, steps, ca.RuleKind.DIFFUSION, seed)
    back = ca.run_backward(g, ca.RuleKind.DIFFUSION, stream)
    diff = int(np.count_nonzero(back.cells != g0.cells))
    return _report(
        "reversibility",
        back.same_state(g0),
        {"size": size, "density": density, "steps": steps, "differing_cells": diff},
        {"cells": "exact"},
        seed,
    )


def conservation(seed: int = DEFAULT_SEED, size: int = 64, density: float = 0.3, steps: int = 1000) -> dict:
    g0 = ca.new_grid(size, size, density, seed)
    _, _, summary = ca.run(g0, steps, ca.RuleKind.DIFFUSION, seed)
    counts = summary.counts
    return _report(
        "conservation",
        summary.conserved and len(counts) == steps + 1,
        {"states": len(counts), "initial_count": counts[0], "distinct_counts": sorted(set(counts))},
        {"count": "exact"},
        seed,
    )


def equivalence(seed: int = DEFAULT_SEED, size: int = 64, density: float = 0.3, steps: int = 200) -> dict:
    oracle = surface.exhaustive_block_oracle()
    g0 = ca.new_grid(size, size, density, seed)
    traj = surface.equivalence_check(g0, steps, ca.RuleKind.DIFFUSION, seed)
    return _report(
        "equivalence",
        oracle.equal and traj.equal,
        {
            "block_cases": oracle.cases,
            "block_mismatches": oracle.mismatches,
            "trajectory_steps": traj.steps_checked,
            "first_divergence": traj.first_divergence,
        },
        {"state": "exact"},
        seed,
    )


def _athena_sweep(law, measure: str, max_x: int = 11, radii=(0.5, 1.0, 2.0), rel: float = 1e-9) -> tuple[bool, list]:
    rows = []
    ok = True
    for r in radii:
        for x in range(max_x + 1):
            curve = fractal.athena_curve(Circle((0.0, 0.0), r, surface.BASE_POLARITY), x)
            got = getattr(fractal.measures(curve), measure)
            want = law(r, x)
            err = abs(got - want) / want
            ok &= err <= rel
            rows.append({"r": r, "x": x, "value": got, "expected": want, "rel_err": err})
    return ok, rows


def area() -> dict:
    ok, rows = _athena_sweep(fractal.athena_area_law, "total_area")
    return _report("area", ok, {"cases": rows}, {"relative": 1e-9})


def length() -> dict:
    ok, rows = _athena_sweep(fractal.athena_length_law, "total_length")
    return _report("length", ok, {"cases": rows}, {"relative": 1e-9})


def overlap(tol: float = 1e-9) -> dict:
    seed_circle = Circle((0.0, 0.0), 1.0, surface.BASE_POLARITY)
    small = overlap_report_bruteforce(fractal.athena_curve(seed_circle, 6), tol)
    big = overlap_report(fractal.athena_curve(seed_circle, 11), tol)
    return _report(
        "overlap",
        small.ok and big.ok,
        {
            "x6_pairs_examined": small.pairs_examined,
            "x6_overlapping": len(small.overlapping),
            "x11_pairs_examined": big.pairs_examined,
            "x11_overlapping": len(big.overlapping),
            "x11_min_gap": big.min_gap,
        },
        {"tol": tol},
    )


def tiling(tol: float = 1e-9, patch: int = 7) -> dict:
    results = [fractal.tiling_check(x, patch, patch, tol) for x in (1, 2)]
    return _report(
        "tiling",
        all(r.equal for r in results),
        {
            "patch": [patch, patch],
            "levels": [
                {"x": r.level, "compared": r.compared, "unmatched": len(r.unmatched_curve) + len(r.unmatched_packing)}
                for r in results
            ],
        },
        {"tol": tol},
    )


def omega_t(levels: int = 4, tol: float = 1e-6) -> dict:
    rep = fractal.omega_equals_t(levels, OMEGA_WINDOW, tol)
    return _report(
        "omega-t",
        rep.equal,
        {
            "window": OMEGA_WINDOW.as_tuple(),
            "first_mismatch": rep.first_mismatch,
            "levels": [
                {"x": r.level, "compared": r.compared, "unmatched": len(r.unmatched_curve) + len(r.unmatched_packing)}
                for r in rep.levels
            ],
        },
        {"tol": tol},
    )


def symmetry() -> dict:
    lv = fractal.fractal_t(3, SYMMETRY_WINDOW)
    shallow = fractal.radial_symmetry_probe(lv[:2], 1)
    deep = fractal.radial_symmetry_probe(lv, 3)
    return _report(
        "symmetry",
        shallow.asymmetric == 0 and deep.asymmetric >= 1,
        {
            "depth1": {"examined": shallow.examined, "asymmetric": shallow.asymmetric},
            "depth3": {"examined": deep.examined, "asymmetric": deep.asymmetric},
        },
        {"match": 1e-7},
    )


def anchoring(tol: float = 1e-9) -> dict:
    rep = fractal.level_one_anchoring(OMEGA_WINDOW, tol=tol)
    return _report(
        "anchoring",
        rep.ok,
        {"concentric": rep.concentric, "centroid": rep.centroid, "unanchored": rep.unanchored},
        {"tol": tol},
    )


def union_area(seed: int = DEFAULT_SEED, samples: int = 10**6) -> dict:
    est = fractal.union_area_estimate(0, samples, seed)
    z = abs(est.mean - math.pi / 4) / est.stderr
    return _report(
        "union-area",
        z <= 3,
        {"mean": est.mean, "stderr": est.stderr, "expected": math.pi / 4, "z": z, "samples": samples},
        {"stderr_multiple": 3},
        seed,
    )


SUITES = {
    "reversibility": reversibility,
    "conservation": conservation,
    "equivalence": equivalence,
    "area": area,
    "length": length,
    "overlap": overlap,
    "tiling": tiling,
    "omega-t": omega_t,
    "symmetry": symmetry,
    "anchoring": anchoring,
    "union-area": union_area,
}

SEEDED = {"reversibility", "conservation", "equivalence", "union-area"}


def run_suite(name: str, seed: int | None = None) -> dict:
    fn = SUITES[name]
    return fn(seed) if (name in SEEDED and seed is not None) else fn()
