"""SuperIFS: banks of V screens driven by random indices, and code-tree expansion."""
import time
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger

from superfractal.errors import GeometryError, MassConservationError, fail
from superfractal.fractal_types import UNIT_FRAME, Frame, MeasureRaster, Point2, Raster, ScreenBank
from superfractal.geometry import apply_table, centers_of, pixel_centers, points_to_pixels
from superfractal.ifs import PROB_TOL, Ifs
from superfractal.trees import CodeTree, IndexA, sample_index
from superfractal.utils import make_rng, parallel_map

MASS_TOL_IN = 1e-9
MASS_TOL_OUT = 1e-6

MODES = ("sets", "measures")


@dataclass
class SuperIfs:
    ifss: List[Ifs]
    probs: List[float]
    V: int = 1
    name: str = ""
    tables: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.ifss = list(self.ifss)
        self.probs = [float(p) for p in self.probs]
        label = self.name or "superIFS"
        if not self.ifss:
            fail(GeometryError, f"{label}: needs at least one IFS")
        if len(self.probs) != len(self.ifss):
            fail(GeometryError, f"{label}: {len(self.ifss)} IFSs but {len(self.probs)} probabilities")
        if any(p < 0.0 for p in self.probs) or abs(sum(self.probs) - 1.0) > PROB_TOL:
            fail(GeometryError, f"{label}: IFS probabilities {self.probs} are not a distribution")
        M = self.ifss[0].M
        for n, f in enumerate(self.ifss, start=1):
            if f.M != M:
                fail(GeometryError, f"{label}: IFS {n} has {f.M} maps, IFS 1 has {M}")
        if int(self.V) < 1:
            fail(GeometryError, f"{label}: V must be at least 1, got {self.V}")
        self.V = int(self.V)
        self.tables = np.stack([f.table for f in self.ifss])  # (N, M, 12)

    @property
    def N(self) -> int:
        return len(self.ifss)

    @property
    def M(self) -> int:
        return self.ifss[0].M

    def map_probs(self) -> np.ndarray:
        return np.array([f.probs for f in self.ifss], dtype=np.float64)  # (N, M)

    def with_V(self, V: int) -> "SuperIfs":
        return SuperIfs(self.ifss, self.probs, V, self.name)


def _check_index(s: SuperIfs, a: IndexA, bank: ScreenBank) -> None:
    if a.V != bank.V:
        fail(GeometryError, f"index has V={a.V} but the bank holds {bank.V} screens")
    if a.M != s.M:
        fail(GeometryError, f"index has M={a.M} but the IFSs have {s.M} maps")
    a.check_labels(s.N)


def super_step_sets(s: SuperIfs, a: IndexA, bank: ScreenBank) -> ScreenBank:
    """Screen v becomes the union over m of f_m^{n_v} applied to screen v_{v,m}."""
    _check_index(s, a, bank)
    centres = [pixel_centers(r)[2] for r in bank.screens]

    def build(v: int) -> Raster:
        ref = bank.screens[v]
        out = Raster.empty(ref.width, ref.height, ref.frame)
        table = s.tables[a.labels[v] - 1]
        for m in range(s.M):
            pts = centres[a.limbs[v, m] - 1]
            if len(pts) == 0:
                continue
            rows, cols, inside = points_to_pixels(apply_table(table[m], pts), out.width, out.height, out.frame)
            out.bits[rows[inside], cols[inside]] = True
        return out

    return ScreenBank(tuple(parallel_map(build, range(bank.V))), bank.generation + 1)


def super_step_measures(s: SuperIfs, a: IndexA, bank: ScreenBank) -> ScreenBank:
    """Screen v becomes the sum over m of p_m^{n_v} times the push-forward of screen v_{v,m}."""
    _check_index(s, a, bank)
    for v, mu in enumerate(bank.screens, start=1):
        total = mu.total()
        if abs(total - 1.0) > MASS_TOL_IN:
            fail(MassConservationError, f"screen {v} carries mass {total!r}, expected 1")
    sources = []
    for mu in bank.screens:
        rows, cols = np.nonzero(mu.mass)
        sources.append((centers_of(rows, cols, mu.width, mu.height, mu.frame), mu.mass[rows, cols]))
    probs = s.map_probs()

    def build(v: int) -> MeasureRaster:
        ref = bank.screens[v]
        n = a.labels[v] - 1
        flat_parts = []
        weight_parts = []
        for m in range(s.M):
            pts, w = sources[a.limbs[v, m] - 1]
            if len(pts) == 0:
                continue
            rows, cols, inside = points_to_pixels(apply_table(s.tables[n, m], pts), ref.width, ref.height, ref.frame)
            flat_parts.append((rows * ref.width + cols)[inside])
            weight_parts.append(probs[n, m] * w[inside])
        mass = np.zeros(ref.width * ref.height, dtype=np.float64)
        if flat_parts:
            mass = np.bincount(np.concatenate(flat_parts), weights=np.concatenate(weight_parts),
                               minlength=ref.width * ref.height).astype(np.float64)
        total = float(mass.sum())
        if abs(total - 1.0) > MASS_TOL_OUT:
            fail(MassConservationError,
                 f"screen {v + 1} kept mass {total!r} after the step; part of the measure left the frame")
        return MeasureRaster((mass / total).reshape(ref.height, ref.width), ref.frame)

    return ScreenBank(tuple(parallel_map(build, range(bank.V))), bank.generation + 1)


def initial_bank(s: SuperIfs, mode: str, width: int, height: int, frame: Frame = UNIT_FRAME,
                 init: Union[str, Raster, MeasureRaster] = "full") -> ScreenBank:
    """V identical screens: ``full`` square, ``center`` pixel, or a given raster/measure."""
    if mode not in MODES:
        fail(GeometryError, f"mode must be one of {MODES}, got {mode!r}")
    if isinstance(init, Raster):
        screen: Union[Raster, MeasureRaster] = init
        if mode == "measures":
            screen = MeasureRaster(init.bits / float(max(init.count(), 1)), init.frame)
    elif isinstance(init, MeasureRaster):
        screen = init if mode == "measures" else init.support()
    elif init == "full":
        screen = Raster.full(width, height, frame) if mode == "sets" else MeasureRaster.uniform(width, height, frame)
    elif init == "center":
        bits = np.zeros((height, width), dtype=bool)
        bits[height // 2, width // 2] = True
        screen = Raster(bits, frame) if mode == "sets" else MeasureRaster(bits.astype(np.float64), frame)
    else:
        fail(GeometryError, f"unknown initial screen {init!r}")
    return ScreenBank(tuple(screen.copy() for _ in range(s.V)), 0)


@dataclass
class SuperRun:
    bank: ScreenBank
    index_log: List[IndexA]
    mode: str
    seed: int


def iterate_superfractal(s: SuperIfs, mode: str, init: ScreenBank, iterations: int,
                         seed: int) -> Iterator[Tuple[int, IndexA, ScreenBank]]:
    """Yield (step, index, bank) after each of ``iterations`` random steps."""
    if mode not in MODES:
        fail(GeometryError, f"mode must be one of {MODES}, got {mode!r}")
    if init.V != s.V:
        fail(GeometryError, f"initial bank holds {init.V} screens, superIFS has V={s.V}")
    step_fn = super_step_sets if mode == "sets" else super_step_measures
    rng = make_rng(seed)
    bank = init
    for step in range(1, iterations + 1):
        a = sample_index(s.N, s.V, s.M, s.probs, rng)
        bank = step_fn(s, a, bank)
        logger.debug(f"step {step}: index {a.rows()}")
        yield step, a, bank


def run_superfractal(s: SuperIfs, mode: str, init: ScreenBank, iterations: int, seed: int,
                     on_step: Optional[Callable[[int, IndexA, ScreenBank], None]] = None) -> SuperRun:
    if iterations < 0:
        fail(GeometryError, f"iterations must be non-negative, got {iterations}")
    start_time = time.perf_counter()
    log: List[IndexA] = []
    bank = init
    for step, a, bank in iterate_superfractal(s, mode, init, iterations, seed):
        log.append(a)
        if on_step is not None:
            on_step(step, a, bank)
    logger.info(f"{s.name or 'superIFS'}: {iterations} {mode} steps with V={s.V} "
                f"in {time.perf_counter() - start_time:.2f}s")
    return SuperRun(bank, log, mode, seed)


def index_log_frame(index_log: Sequence[IndexA]) -> pd.DataFrame:
    """One row per (step, screen): step, v, n_v, v_{v,1} .. v_{v,M}."""
    rows = []
    for step, a in enumerate(index_log, start=1):
        for v in range(a.V):
            row = {"step": step, "v": v + 1, "n": int(a.labels[v])}
            for m in range(a.M):
                row[f"limb_{m + 1}"] = int(a.limbs[v, m])
            rows.append(row)
    return pd.DataFrame(rows)


# -------------------- code-tree expansion --------------------

def _branch_tables(s: SuperIfs, sigma: CodeTree, depth: int) -> List[np.ndarray]:
    """Per level l < depth: (M**depth, 12) coefficient rows applied at that level on every branch."""
    if sigma.M != s.M:
        fail(GeometryError, f"tree arity {sigma.M} differs from M={s.M}")
    if depth > sigma.depth:
        fail(GeometryError, f"expansion depth {depth} exceeds tree depth {sigma.depth}")
    labels = np.concatenate(sigma.levels[:depth]) if depth else np.array([], dtype=np.int64)
    if labels.size and labels.max() > s.N:
        fail(GeometryError, f"tree label {int(labels.max())} exceeds N={s.N}")
    branches = np.arange(s.M ** depth)
    out = []
    for l in range(depth):
        node = branches // s.M ** (depth - l)
        digit = (branches // s.M ** (depth - l - 1)) % s.M
        out.append(s.tables[sigma.levels[l][node] - 1, digit])
    return out


def backward_expand(s: SuperIfs, sigma: CodeTree, x0: Point2, depth: Optional[int] = None) -> np.ndarray:
    """Points f^{sigma()}_{i1} o f^{sigma(i1)}_{i2} o ... o f^{sigma(i1..i_{k-1})}_{ik} (x0).

    Rows follow the lexicographic order of the branches (i1, ..., ik).
    """
    k = sigma.depth if depth is None else int(depth)
    tables = _branch_tables(s, sigma, k)
    pts = np.tile(np.array([[x0.x, x0.y]], dtype=np.float64), (s.M ** k, 1))
    for l in reversed(range(k)):
        pts = apply_table(tables[l], pts)
    return pts


def backward_expand_measure(s: SuperIfs, sigma: CodeTree, x0: Point2,
                            depth: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Backward expansion with branch weights prod p^{sigma(node)}_{digit}."""
    k = sigma.depth if depth is None else int(depth)
    pts = backward_expand(s, sigma, x0, k)
    probs = s.map_probs()
    branches = np.arange(s.M ** k)
    weights = np.ones(s.M ** k, dtype=np.float64)
    for l in range(k):
        node = branches // s.M ** (k - l)
        digit = (branches // s.M ** (k - l - 1)) % s.M
        weights *= probs[sigma.levels[l][node] - 1, digit]
    return pts, weights


def weighted_points_to_measure(pts: np.ndarray, weights: np.ndarray, width: int, height: int,
                               frame: Frame = UNIT_FRAME) -> MeasureRaster:
    rows, cols, inside = points_to_pixels(pts, width, height, frame)
    mass = np.bincount((rows * width + cols)[inside], weights=weights[inside], minlength=width * height)
    total = float(mass.sum())
    if total <= 0.0:
        fail(MassConservationError, "no weighted point landed inside the frame")
    if abs(total - 1.0) > MASS_TOL_OUT:
        logger.warning(f"{1.0 - total:.3e} of the expansion's mass fell outside frame {frame}")
    return MeasureRaster((mass / total).reshape(height, width), frame)
