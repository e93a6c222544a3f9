"""Iterated function systems: deterministic and random (chaos game) rendering."""
import itertools
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from superfractal import kernels
from superfractal.errors import GeometryError, MassConservationError, SingularEvaluationError, fail
from superfractal.fractal_types import UNIT_FRAME, Address, Frame, MeasureRaster, Point2, Raster
from superfractal.geometry import (
    Map2,
    apply,
    apply_many,
    centers_of,
    estimate_lipschitz,
    pixel_centers,
    points_to_pixels,
)
from superfractal.utils import draw_digits, make_rng, probability_cdf

PROB_TOL = 1e-12
CHUNK = 1 << 20


@dataclass
class Ifs:
    maps: List[Map2]
    probs: List[float]
    name: str = ""
    average_contractive: bool = False
    table: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.maps = list(self.maps)
        self.probs = [float(p) for p in self.probs]
        label = self.name or "ifs"
        if not self.maps:
            fail(GeometryError, f"{label}: an IFS needs at least one map")
        if len(self.probs) != len(self.maps):
            fail(GeometryError, f"{label}: {len(self.maps)} maps but {len(self.probs)} probabilities")
        if any(p < 0.0 for p in self.probs):
            fail(GeometryError, f"{label}: negative probability in {self.probs}")
        if abs(sum(self.probs) - 1.0) > PROB_TOL:
            fail(GeometryError, f"{label}: probabilities sum to {sum(self.probs)!r}, not 1")
        if not self.average_contractive:
            for m, f in enumerate(self.maps, start=1):
                lip = estimate_lipschitz(f)
                if lip >= 1.0:
                    fail(GeometryError,
                         f"{label}: map {m} has estimated Lipschitz constant {lip:.4f} >= 1; "
                         "set average_contractive to accept it")
        self.table = np.stack([f.as_array() for f in self.maps])

    @property
    def M(self) -> int:
        return len(self.maps)


# -------------------- deterministic algorithm --------------------

def push_raster(f: Map2, src: Raster, out: Raster) -> None:
    """OR the image of src's pixel centres under f into out."""
    _, _, pts = pixel_centers(src)
    if len(pts) == 0:
        return
    rows, cols, inside = points_to_pixels(apply_many(f, pts), out.width, out.height, out.frame)
    out.bits[rows[inside], cols[inside]] = True


def hutchinson_set(ifs: Ifs, r: Raster) -> Raster:
    out = Raster.empty(r.width, r.height, r.frame)
    for f in ifs.maps:
        push_raster(f, r, out)
    return out


def deterministic_attractor(ifs: Ifs, r0: Raster, k: int, stop_early: bool = True) -> Raster:
    if k < 0:
        fail(GeometryError, f"iteration count must be non-negative, got {k}")
    r = r0.copy()
    for step in range(1, k + 1):
        nxt = hutchinson_set(ifs, r)
        if stop_early and nxt == r:
            logger.debug(f"{ifs.name or 'ifs'}: raster stable after {step - 1} steps")
            return nxt
        r = nxt
    return r


def deterministic_texture(ifs: Ifs, labels: np.ndarray, k: int, frame: Frame = UNIT_FRAME) -> np.ndarray:
    """Deterministic algorithm carrying a colour label per pixel (0 = empty).

    Each output pixel takes the label of the last source pixel mapped onto it,
    maps taken in order and pixels in row-major order.
    """
    cur = np.asarray(labels).copy()
    height, width = cur.shape
    for _ in range(k):
        rows, cols = np.nonzero(cur)
        if len(rows) == 0:
            break
        vals = cur[rows, cols]
        pts = centers_of(rows, cols, width, height, frame)
        flat_parts = []
        val_parts = []
        for f in ifs.maps:
            r2, c2, inside = points_to_pixels(apply_many(f, pts), width, height, frame)
            flat_parts.append((r2 * width + c2)[inside])
            val_parts.append(vals[inside])
        flat = np.concatenate(flat_parts)
        vs = np.concatenate(val_parts)
        nxt = np.zeros_like(cur)
        if len(flat):
            # last write wins: first occurrence in the reversed stream
            uniq, first = np.unique(flat[::-1], return_index=True)
            nxt.flat[uniq] = vs[::-1][first]
        cur = nxt
    return cur


# -------------------- random iteration --------------------

def _start_point(ifs: Ifs, x0: Optional[Point2]) -> Tuple[float, float]:
    if x0 is not None:
        return float(x0.x), float(x0.y)
    return 0.5, 0.5


def chaos_game_points(ifs: Ifs, seed: int, n_points: int, burn_in: int = 100,
                      x0: Optional[Point2] = None) -> np.ndarray:
    """Orbit points after burn-in, shape (n_points - burn_in, 2)."""
    if n_points <= burn_in:
        fail(GeometryError, f"n_points ({n_points}) must exceed burn_in ({burn_in})")
    rng = make_rng(seed)
    cdf = probability_cdf(ifs.probs)
    x, y = _start_point(ifs, x0)
    out = np.empty((n_points, 2), dtype=np.float64)
    for start in range(0, n_points, CHUNK):
        size = min(CHUNK, n_points - start)
        digits = draw_digits(rng, cdf, size)
        x, y, status = kernels.orbit_points(ifs.table, digits, x, y, out[start:start + size])
        if status != kernels.STATUS_OK:
            fail(SingularEvaluationError, f"singular map evaluation near ({x}, {y}) in chaos game")
    return out[burn_in:]


def chaos_counts(ifs: Ifs, seed: int, n_points: int, burn_in: int, width: int, height: int,
                 frame: Frame = UNIT_FRAME, x0: Optional[Point2] = None) -> np.ndarray:
    """Per-pixel visit counts of the orbit after burn-in."""
    if n_points <= burn_in:
        fail(GeometryError, f"n_points ({n_points}) must exceed burn_in ({burn_in})")
    rng = make_rng(seed)
    cdf = probability_cdf(ifs.probs)
    x, y = _start_point(ifs, x0)
    counts = np.zeros((height, width), dtype=np.int64)
    xmin, ymin, xmax, ymax = (float(v) for v in frame)
    dropped_total = 0
    for start in range(0, n_points, CHUNK):
        size = min(CHUNK, n_points - start)
        skip = max(0, burn_in - start)
        digits = draw_digits(rng, cdf, size)
        x, y, dropped, status = kernels.orbit_counts(
            ifs.table, digits, x, y, skip, counts, xmin, ymin, xmax, ymax)
        if status != kernels.STATUS_OK:
            fail(SingularEvaluationError, f"singular map evaluation near ({x}, {y}) in chaos game")
        dropped_total += int(dropped)
    if dropped_total:
        logger.warning(f"{dropped_total} of {n_points - burn_in} orbit points fell outside frame {frame}")
    return counts


def chaos_game(ifs: Ifs, seed: int, n_points: int, burn_in: int = 100, width: int = 256,
               height: int = 256, frame: Frame = UNIT_FRAME, x0: Optional[Point2] = None) -> Raster:
    counts = chaos_counts(ifs, seed, n_points, burn_in, width, height, frame, x0)
    return Raster(counts > 0, frame)


def chaos_game_measure(ifs: Ifs, seed: int, n_points: int, burn_in: int = 100, width: int = 256,
                       height: int = 256, frame: Frame = UNIT_FRAME,
                       x0: Optional[Point2] = None) -> MeasureRaster:
    counts = chaos_counts(ifs, seed, n_points, burn_in, width, height, frame, x0)
    total = int(counts.sum())
    if total == 0:
        fail(MassConservationError, "no orbit point landed inside the frame")
    return MeasureRaster(counts / float(total), frame)


def measure_to_gray(measure: MeasureRaster, gamma: float = 0.5) -> np.ndarray:
    """Grey levels round(255 * (m / m_max) ** gamma) as uint8, shape (height, width)."""
    if not 0.0 < gamma <= 1.0:
        fail(GeometryError, f"gamma must lie in (0, 1], got {gamma}")
    peak = float(measure.mass.max())
    if peak <= 0.0:
        return np.zeros(measure.mass.shape, dtype=np.uint8)
    return np.rint(255.0 * np.power(measure.mass / peak, gamma)).astype(np.uint8)


def cell_masses(measure: MeasureRaster, ifs: Ifs, attractor: Raster) -> List[float]:
    """Mass of each first-level piece f_m(attractor); overlapping pixels count for every piece."""
    masses = []
    for f in ifs.maps:
        piece = Raster.empty(attractor.width, attractor.height, attractor.frame)
        push_raster(f, attractor, piece)
        masses.append(float(measure.mass[piece.bits].sum()))
    return masses


# -------------------- addresses --------------------

def address_point(ifs: Ifs, addr: Address, x0: Point2) -> Point2:
    """f_{s1} o f_{s2} o ... o f_{sk} (x0); innermost map applied first."""
    if not addr.digits:
        fail(GeometryError, "address_point needs an address of length >= 1")
    for d in addr.digits:
        if not 1 <= d <= ifs.M:
            fail(GeometryError, f"address digit {d} out of range 1..{ifs.M}")
    p = x0
    for d in reversed(addr.digits):
        p = apply(ifs.maps[d - 1], p)
    return p


def shift_cylinder_measure(ifs: Ifs, addr: Address) -> float:
    for d in addr.digits:
        if not 1 <= d <= ifs.M:
            fail(GeometryError, f"address digit {d} out of range 1..{ifs.M}")
    return float(math.prod(ifs.probs[d - 1] for d in addr.digits))


def cylinder_addresses(M: int, k: int) -> Sequence[Tuple[int, ...]]:
    """All length-k addresses in lexicographic order."""
    return list(itertools.product(range(1, M + 1), repeat=k))
