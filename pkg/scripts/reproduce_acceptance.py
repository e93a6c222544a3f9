"""Run every acceptance experiment and print a pass/fail table.

Usage: python scripts/reproduce_acceptance.py [output_csv]
"""
import math
import os
import sys
import time
from typing import Callable, List, Tuple

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pandas as pd

from presets.fish import FISH_RELATIONS, fish_maps, fish_superifs
from presets.sierpinski import sierpinski_ifs, sierpinski_superifs, third_ifs
from superfractal.apps import evaluate_interpolant, spacefill_approximant, spacefill_superifs
from superfractal.dimension import (
    box_dimension,
    homogeneous_dimension,
    moran_dimension,
    random_dimension,
    scale_table,
    vvariable_dimension,
)
from superfractal.fractal_types import InterpolationData, Point2, Raster
from superfractal.geometry import apply, apply_many
from superfractal.ifs import chaos_game, deterministic_attractor
from superfractal.superifs import backward_expand
from superfractal.trees import (
    CodeTree,
    FunctionTree,
    Grove,
    IndexA,
    compose,
    count_distinct_subtrees,
    eta,
    eta_function_tree,
    forward_orbit,
    free_probability_mc,
    rho_cylinder,
    rho_v_histogram,
    sample_index,
    tree_count,
    tree_from_code,
)

SEED = 2024
HOMOGENEOUS = 2.0 * math.log(3.0) / (math.log(2.0) + math.log(3.0))
RANDOM = 1.262

Check = Tuple[bool, str]


def moran() -> Check:
    a = moran_dimension([0.5] * 3)
    b = moran_dimension([1.0 / 3.0] * 3)
    ok = abs(a - 1.584962500721156) < 1e-9 and abs(b - 1.0) < 1e-9
    return ok, f"D1={a:.12f} D2={b:.12f}"


def random_regime() -> Check:
    d = random_dimension(scale_table(sierpinski_superifs()), [0.5, 0.5])
    return abs(d - RANDOM) < 1e-3, f"D_R={d:.6f}"


def homogeneous_regime() -> Check:
    table = scale_table(sierpinski_superifs())
    closed = homogeneous_dimension(table, [0.5, 0.5])
    est = vvariable_dimension(table, [0.5, 0.5], 1, 100_000, SEED)
    ok = abs(closed - HOMOGENEOUS) < 1e-9 and abs(est.value - HOMOGENEOUS) < 0.01
    return ok, f"closed={closed:.9f} V=1 estimate={est.value:.4f}+-{est.uncertainty:.4f}"


def vvariable_bracket() -> Check:
    table = scale_table(sierpinski_superifs())
    estimates = [vvariable_dimension(table, [0.5, 0.5], V, 100_000, SEED + V) for V in (2, 8, 64)]
    inside = all(HOMOGENEOUS - 0.01 < e.value < RANDOM + 0.01 for e in estimates)
    ordered = all(b.value + 3.0 * (a.uncertainty + b.uncertainty) >= a.value
                  for a, b in zip(estimates, estimates[1:]))
    return inside and ordered, " ".join(f"V={V}:{e.value:.4f}" for V, e in zip((2, 8, 64), estimates))


def cylinder_bound() -> Check:
    rng = np.random.default_rng(SEED)
    n, worst = 100_000, 0.0
    ok = True
    for k in (1, 2):
        for V in (16, 64):
            hist = rho_v_histogram(2, 2, V, [0.5, 0.5], k, n, rng)
            bound = 2.0 * 2 ** (2 * k) / (3.0 * V)
            for code in range(tree_count(2, 2, k)):
                rho = rho_cylinder(tree_from_code(code, 2, 2, k), [0.5, 0.5])
                se = math.sqrt(hist[code] * (1.0 - hist[code]) / n)
                gap = abs(hist[code] - rho)
                ok &= gap <= bound + 3.0 * se
                worst = max(worst, gap / bound)
    return ok, f"largest gap / bound = {worst:.3f}"


def free_trees() -> Check:
    p, se = free_probability_mc(2, 64, 2, 100_000, np.random.default_rng(SEED))
    lower = 1.0 - 2.0 * 2 ** 4 / (3.0 * 64) - 3.0 * se
    return p >= lower, f"Pr(free)={p:.4f} >= {lower:.4f}"


def conjugacy() -> Check:
    s = fish_superifs(V=3)
    rng = np.random.default_rng(SEED)
    x0 = Point2(0.5, 0.5)
    for _ in range(100):
        k = int(rng.integers(0, 6))
        grove = Grove(tuple(
            CodeTree(2, tuple(rng.integers(1, 3, size=2 ** l) for l in range(k + 1))) for _ in range(3)))
        a = IndexA(rng.integers(1, 3, size=3), rng.integers(1, 4, size=(3, 2)))
        lifted = eta(a, grove)
        for v in range(3):
            whole = backward_expand(s, lifted[v], x0, k + 1)
            ifs = s.ifss[a.labels[v] - 1]
            parts = np.vstack([apply_many(ifs.maps[m], backward_expand(s, grove[a.limbs[v, m] - 1], x0, k))
                               for m in range(2)])
            if not np.allclose(np.sort(whole, axis=0), np.sort(parts, axis=0), rtol=0.0, atol=1e-9):
                return False, f"mismatch at depth {k + 1}"
    return True, "100 instances"


def v_variability() -> Check:
    rng = np.random.default_rng(SEED)
    indices = [sample_index(3, 4, 2, [0.2, 0.3, 0.5], rng) for _ in range(1000)]
    worst = 0
    for grove in forward_orbit(indices, max_depth=8):
        for level in range(grove.depth + 1):
            worst = max(worst, count_distinct_subtrees(grove, level))
    return worst <= 4, f"max distinct subtrees {worst} (V=4)"


def function_tree_algebra() -> Check:
    rng = np.random.default_rng(SEED)
    V, M = 3, 2

    def draw() -> IndexA:
        return IndexA(rng.integers(1, 5, size=V), rng.integers(1, V + 1, size=(V, M)))

    for _ in range(1000):
        a, b, c = draw(), draw(), draw()
        fa, fb, fc = (FunctionTree.from_index(x) for x in (a, b, c))
        if compose(compose(fa, fb), fc) != compose(fa, compose(fb, fc)):
            return False, "composition is not associative"
        grove = Grove(tuple(CodeTree.constant(M, 1, int(n)) for n in rng.integers(1, 5, size=V)))
        if eta_function_tree(compose(fa, fb), grove) != eta(a, eta(b, grove)):
            return False, "eta of a composition differs"
    return True, "1000 triples"


def chaos_vs_oracle() -> Check:
    ifs = sierpinski_ifs()
    oracle = deterministic_attractor(ifs, Raster.full(256, 256), 30)
    chaos = chaos_game(ifs, SEED, 1_000_000, 100, 256, 256)
    covered = np.count_nonzero(chaos.bits & oracle.bits) / oracle.count()
    extra = np.count_nonzero(chaos.bits & ~oracle.bits) / oracle.count()
    return covered >= 0.99 and extra <= 0.005, f"covered={covered:.4f} extra={extra:.4f}"


def fish_points() -> Check:
    maps = fish_maps()
    worst = 0.0
    for key, p, image in FISH_RELATIONS:
        q = apply(maps[key], p)
        worst = max(worst, abs(q.x - image.x), abs(q.y - image.y))
    return worst < 1e-12, f"max error {worst:.2e} over {len(FISH_RELATIONS)} relations"


def spacefill() -> Check:
    s = spacefill_superifs()
    first = spacefill_approximant(s, CodeTree.constant(3, 1, 1), 1).vertices
    ok = np.allclose(first, [[0.0, 0.0], [0.0, 0.5], [0.5, 0.5], [1.0, 0.0]], atol=1e-12)
    for k in range(7):
        v = spacefill_approximant(s, CodeTree.constant(3, k, 2), k).vertices
        ok &= np.allclose(v[0], [0.0, 0.0], atol=1e-9) and np.allclose(v[-1], [1.0, 0.0], atol=1e-9)
    return bool(ok), "O->A->B->C; endpoints fixed for depths 0..6"


def interpolation() -> Check:
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(100):
        I = int(rng.integers(1, 6))
        xs = np.concatenate([[rng.uniform(-2.0, 2.0)], rng.uniform(0.5, 1.5, size=I)]).cumsum()
        ys = rng.normal(size=I + 1)
        d = tuple(float(v) for v in rng.uniform(-0.2, 0.2, size=I))
        data = InterpolationData(tuple(zip(xs.tolist(), ys.tolist())), d)
        worst = max(worst, float(np.max(np.abs(evaluate_interpolant(data, xs, depth=16) - ys))))
    return worst < 1e-6, f"max error {worst:.2e}"


def box_counting() -> Check:
    half = deterministic_attractor(sierpinski_ifs(), Raster.full(1024, 1024), 30)
    third = deterministic_attractor(third_ifs(), Raster.full(729, 729), 30)
    d1, _ = box_dimension(half)
    d2, _ = box_dimension(third, [1, 3, 9, 27, 81])
    ok = abs(d1 - math.log(3) / math.log(2)) <= 0.05 and abs(d2 - 1.0) <= 0.08
    return ok, f"D1={d1:.3f} D2={d2:.3f}"


CHECKS: List[Tuple[str, Callable[[], Check]]] = [
    ("moran dimensions", moran),
    ("random dimension", random_regime),
    ("homogeneous dimension", homogeneous_regime),
    ("V-variable bracketing", vvariable_bracket),
    ("cylinder measure bound", cylinder_bound),
    ("free tree probability", free_trees),
    ("code-tree conjugacy", conjugacy),
    ("V-variability of groves", v_variability),
    ("function tree algebra", function_tree_algebra),
    ("chaos game vs oracle", chaos_vs_oracle),
    ("fish point relations", fish_points),
    ("space-filling fixture", spacefill),
    ("fractal interpolation", interpolation),
    ("box counting", box_counting),
]


def main(output_csv: str = "") -> int:
    rows = []
    for number, (name, check) in enumerate(CHECKS, start=1):
        start = time.perf_counter()
        passed, detail = check()
        elapsed = time.perf_counter() - start
        rows.append({"criterion": number, "name": name, "passed": bool(passed), "detail": detail,
                     "seconds": round(elapsed, 3)})
        print(f"{number:>2} {'PASS' if passed else 'FAIL'} {name:<26} {elapsed:8.2f}s  {detail}")
    table = pd.DataFrame(rows)
    if output_csv:
        table.to_csv(output_csv, index=False)
        print(f"Wrote {output_csv}")
    failed = int((~table["passed"]).sum())
    print(f"{len(table) - failed}/{len(table)} criteria passed")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1] if len(sys.argv) > 1 else ""))
