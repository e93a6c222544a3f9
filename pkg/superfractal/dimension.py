"""Dimension of attractors: Moran-type equations, Lyapunov exponents of flow matrices, box counting."""
import math
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.optimize import bisect

from superfractal import kernels
from superfractal.errors import BracketError, DegenerateFitError, GeometryError, NotSimilitudeError, fail
from superfractal.fractal_types import DimensionEstimate, LyapunovEstimate, Raster
from superfractal.geometry import similitude_from_map
from superfractal.ifs import Ifs
from superfractal.superifs import SuperIfs
from superfractal.trees import IndexA
from superfractal.utils import parallel_map, spawn_rngs

ROOT_TOL = 1e-12
RESIDUAL_TOL = 1e-10
ALPHA_MAX = 50.0
REGIMES = ("deterministic", "random", "homogeneous", "vvariable")


@dataclass(frozen=True)
class ScaleTable:
    """Contraction ratios s[n][m] of similitude map m in IFS n."""

    rows: Tuple[Tuple[float, ...], ...]

    def __post_init__(self) -> None:
        rows = tuple(tuple(float(s) for s in row) for row in self.rows)
        if not rows or not rows[0]:
            fail(GeometryError, "scale table must be non-empty")
        M = len(rows[0])
        for n, row in enumerate(rows, start=1):
            if len(row) != M:
                fail(GeometryError, f"scale row {n} has {len(row)} entries, row 1 has {M}")
            for s in row:
                if not 0.0 < s < 1.0:
                    fail(GeometryError, f"contraction ratio {s} of IFS {n} is outside (0, 1)")
        object.__setattr__(self, "rows", rows)

    @property
    def N(self) -> int:
        return len(self.rows)

    @property
    def M(self) -> int:
        return len(self.rows[0])

    def as_array(self) -> np.ndarray:
        return np.array(self.rows, dtype=np.float64)


def scale_table(system) -> ScaleTable:
    """Ratios of an Ifs or SuperIfs whose maps are all similitudes."""
    ifss = system.ifss if isinstance(system, SuperIfs) else [system]
    rows = []
    for n, f in enumerate(ifss, start=1):
        try:
            rows.append(tuple(similitude_from_map(m).scale for m in f.maps))
        except NotSimilitudeError as exc:
            msg = (f"IFS {n} contains a non-similitude map ({exc}); dimension formulas need "
                   "similitudes satisfying the open set condition")
            logger.error(msg)
            raise NotSimilitudeError(msg) from exc
    return ScaleTable(tuple(rows))


def _solve(fn, lo: float, hi: float, what: str) -> float:
    f_lo, f_hi = fn(lo), fn(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if f_lo * f_hi > 0.0:
        fail(BracketError, f"{what}: no sign change on [{lo}, {hi}] (values {f_lo:.3e}, {f_hi:.3e})")
    root = float(bisect(fn, lo, hi, xtol=ROOT_TOL, maxiter=500))
    residual = fn(root)
    if abs(residual) >= RESIDUAL_TOL:
        logger.warning(f"{what}: residual {residual:.3e} at D={root:.12f} exceeds {RESIDUAL_TOL:.0e}")
    return root


def moran_objective(scales: Sequence[float], D: float) -> float:
    """sum_m s_m**D - 1, strictly decreasing in D."""
    return float(np.sum(np.asarray(scales, dtype=np.float64) ** D)) - 1.0


def moran_dimension(scales: Sequence[float]) -> float:
    """Root of sum_m s_m**D = 1."""
    s = np.asarray(scales, dtype=np.float64)
    if s.size == 0:
        fail(GeometryError, "moran_dimension needs at least one ratio")
    if np.any((s <= 0.0) | (s >= 1.0)):
        fail(GeometryError, f"ratios must lie in (0, 1), got {s.tolist()}")
    return _solve(lambda D: moran_objective(s, D), 0.0, ALPHA_MAX, "moran")


def _check_P(table: ScaleTable, P: Sequence[float]) -> np.ndarray:
    p = np.asarray(P, dtype=np.float64)
    if p.shape != (table.N,):
        fail(GeometryError, f"P has {p.size} entries but the table has {table.N} rows")
    if np.any(p < 0.0) or abs(p.sum() - 1.0) > 1e-12:
        fail(GeometryError, f"P={p.tolist()} is not a probability vector")
    return p


def random_objective(table: ScaleTable, P: Sequence[float], D: float) -> float:
    return float(np.asarray(P, dtype=np.float64) @ np.sum(table.as_array() ** D, axis=1)) - 1.0


def homogeneous_objective(table: ScaleTable, P: Sequence[float], D: float) -> float:
    return float(np.asarray(P, dtype=np.float64) @ np.log(np.sum(table.as_array() ** D, axis=1)))


def random_dimension(table: ScaleTable, P: Sequence[float]) -> float:
    """Root of sum_n P_n sum_m s_{n,m}**D = 1 (V -> infinity)."""
    p = _check_P(table, P)
    return _solve(lambda D: random_objective(table, p, D), 0.0, ALPHA_MAX, "random")


def homogeneous_dimension(table: ScaleTable, P: Sequence[float]) -> float:
    """Root of sum_n P_n log(sum_m s_{n,m}**D) = 0 (V = 1)."""
    p = _check_P(table, P)
    return _solve(lambda D: homogeneous_objective(table, p, D), 0.0, ALPHA_MAX, "homogeneous")


@dataclass
class FlowMatrix:
    matrix: np.ndarray  # (V, V), non-negative
    alpha: float


def flow_matrix(a: IndexA, table: ScaleTable, alpha: float) -> FlowMatrix:
    """M[v, w] = sum over m with v_{v,m} = w of s_{n_v, m}**alpha."""
    a.check_labels(table.N)
    if a.M != table.M:
        fail(GeometryError, f"index has M={a.M} but the table has {table.M} columns")
    weights = table.as_array() ** alpha
    mat = np.zeros((a.V, a.V), dtype=np.float64)
    for v in range(a.V):
        for m in range(a.M):
            mat[v, a.limbs[v, m] - 1] += weights[a.labels[v] - 1, m]
    return FlowMatrix(mat, float(alpha))


_STEP_CHUNK_ELEMS = 1 << 22


def _chain_log_norm(weights: np.ndarray, P: np.ndarray, V: int, k: int,
                    rng: np.random.Generator, renorm_every: int) -> float:
    """log of 1^T M^1 ... M^k 1 for one random chain of k flow matrices."""
    N, M = weights.shape
    cdf = np.cumsum(P)
    cdf /= cdf[-1]
    u = np.full(V, 1.0, dtype=np.float64)
    log_sum = 0.0
    chunk = max(1, _STEP_CHUNK_ELEMS // (V * (M + 1)))
    done = 0
    while done < k:
        steps = min(chunk, k - done)
        labels = np.minimum(np.searchsorted(cdf, rng.random((steps, V)), side="right"), N - 1)
        limbs = rng.integers(0, V, size=(steps, V, M))
        log_sum += kernels.flow_chain(weights, labels.astype(np.int64), limbs.astype(np.int64), u, renorm_every)
        done += steps
    return log_sum + math.log(float(u.sum()))


def lyapunov(table: ScaleTable, P: Sequence[float], V: int, alpha: float, k: int, seed: int,
             replicas: int = 8, renorm_every: int = 1) -> LyapunovEstimate:
    """gamma(alpha) = lim (1/k) log ||M^1(alpha) ... M^k(alpha)||, over independent replica chains.

    The same seed yields the same index chains for every alpha.
    """
    if k < 1 or replicas < 1 or V < 1:
        fail(GeometryError, f"lyapunov needs k, replicas and V >= 1 (got {k}, {replicas}, {V})")
    p = _check_P(table, P)
    weights = table.as_array() ** alpha
    rngs = spawn_rngs(seed, replicas)
    logs = parallel_map(lambda rng: _chain_log_norm(weights, p, V, k, rng, renorm_every), rngs)
    gammas = np.asarray(logs) / k
    stderr = float(gammas.std(ddof=1) / math.sqrt(replicas)) if replicas > 1 else 0.0
    return LyapunovEstimate(float(gammas.mean()), stderr, float(alpha), int(k), int(V), int(seed), int(replicas))


def vvariable_dimension(table: ScaleTable, P: Sequence[float], V: int, k: int, seed: int,
                        tol: float = 1e-4, replicas: int = 8) -> DimensionEstimate:
    """Root of gamma(alpha) = 0 found by bisection with common random numbers."""
    start_time = time.perf_counter()
    evaluations: List[dict] = []

    def gamma(alpha: float, run_seed: int = seed) -> LyapunovEstimate:
        est = lyapunov(table, P, V, alpha, k, run_seed, replicas)
        evaluations.append({"alpha": alpha, "gamma_estimate": est.gamma, "stderr": est.stderr,
                            "k": k, "V": V, "seed": run_seed})
        logger.debug(f"gamma({alpha:.6f}) = {est.gamma:.6e} +- {est.stderr:.1e}")
        return est

    g0 = gamma(0.0)
    if g0.gamma <= 0.0:
        fail(BracketError, f"gamma(0) = {g0.gamma:.3e} is not positive; cannot bracket the root")
    # flow-matrix row sums are >= 1 at the smallest per-IFS Moran root and <= 1 at the largest
    morans = [moran_dimension(row) for row in table.rows]
    lo, hi = min(morans), max(morans)
    if hi - lo <= tol:
        root = 0.5 * (lo + hi)
    else:
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if gamma(mid).gamma > 0.0:
                lo = mid
            else:
                hi = mid
        root = 0.5 * (lo + hi)

    check = gamma(root, seed + 1)
    h = max(10.0 * tol, 1e-3)
    slope = (gamma(root + h, seed + 1).gamma - gamma(root - h, seed + 1).gamma) / (2.0 * h)
    spread = abs(check.gamma) + check.stderr
    uncertainty = max(tol, spread / abs(slope)) if slope != 0.0 else float("inf")
    if check.stderr > 0.0 and abs(check.gamma) > 3.0 * check.stderr:
        logger.warning(f"independent replication gives gamma({root:.5f}) = {check.gamma:.3e}, "
                       f"more than 3 standard errors from 0")
    logger.info(f"V={V} dimension {root:.5f} +- {uncertainty:.5f} "
                f"({len(evaluations)} gamma evaluations, {time.perf_counter() - start_time:.1f}s)")
    return DimensionEstimate(root, uncertainty, check.gamma, "vvariable", evaluations)


def deterministic_dimension(ifs: Ifs) -> float:
    return moran_dimension(scale_table(ifs).rows[0])


def estimate_dimension(regime: str, system, P: Optional[Sequence[float]] = None, V: int = 1,
                       k: int = 100_000, seed: int = 0, tol: float = 1e-4,
                       replicas: int = 8) -> DimensionEstimate:
    if regime not in REGIMES:
        fail(GeometryError, f"regime must be one of {REGIMES}, got {regime!r}")
    table = scale_table(system)
    if P is None:
        P = system.probs if isinstance(system, SuperIfs) else [1.0]
    if regime == "deterministic":
        if table.N != 1:
            fail(GeometryError, "the deterministic regime needs a single IFS")
        root = moran_dimension(table.rows[0])
        return DimensionEstimate(root, 0.0, moran_objective(table.rows[0], root), regime)
    if regime == "random":
        root = random_dimension(table, P)
        return DimensionEstimate(root, 0.0, random_objective(table, P, root), regime)
    if regime == "homogeneous":
        root = homogeneous_dimension(table, P)
        return DimensionEstimate(root, 0.0, homogeneous_objective(table, P, root), regime)
    return vvariable_dimension(table, P, V, k, seed, tol, replicas)


# -------------------- box counting --------------------

def default_box_sizes(r: Raster) -> List[int]:
    """Powers of two from 1 up to a quarter of the shorter side."""
    sizes = []
    s = 1
    while s <= min(r.width, r.height) // 4:
        sizes.append(s)
        s *= 2
    return sizes


def box_counts(r: Raster, box_sizes: Sequence[int]) -> np.ndarray:
    """Number of size x size pixel boxes, aligned to the top-left corner, containing a set pixel."""
    bits = r.bits.astype(np.int64)
    counts = []
    for size in box_sizes:
        blocks = np.add.reduceat(
            np.add.reduceat(bits, np.arange(0, bits.shape[0], size), axis=0),
            np.arange(0, bits.shape[1], size), axis=1)
        counts.append(int(np.count_nonzero(blocks)))
    return np.asarray(counts)


def box_dimension(r: Raster, box_sizes: Optional[Sequence[int]] = None) -> Tuple[float, float]:
    """Least-squares slope of log N against log(1/size) and the fit's r**2."""
    sizes = list(default_box_sizes(r) if box_sizes is None else box_sizes)
    if len(sizes) < 3:
        fail(GeometryError, f"box counting needs at least 3 box sizes, got {sizes}")
    if r.count() == 0:
        fail(DegenerateFitError, "box counting of an empty raster")
    counts = box_counts(r, sizes)
    if np.all(counts == counts[0]):
        fail(DegenerateFitError, f"every box size gives the same count {int(counts[0])}")
    x = np.log(1.0 / np.asarray(sizes, dtype=np.float64))
    y = np.log(counts.astype(np.float64))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0.0 else 1.0
    return float(slope), r2
