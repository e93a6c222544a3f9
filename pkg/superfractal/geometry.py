"""Planar maps, raster coordinates and the pixel Hausdorff distance.

Every map is normalised to a 12-coefficient rational form

    x' = (a1 x + b1 y + c1) / (d1 x + e1 y + g1)
    y' = (a2 x + b2 y + c2) / (d2 x + e2 y + g2)

stored as ``(a1, b1, c1, a2, b2, c2, d1, e1, g1, d2, e2, g2)``. Affine maps carry
the denominators ``(0, 0, 1)`` so both kinds evaluate through the same formula,
here and in the compiled kernels.
"""
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.spatial import cKDTree

from superfractal.errors import (
    EmptyRasterError,
    GeometryError,
    NotSimilitudeError,
    ShapeMismatchError,
    SingularEvaluationError,
    fail,
)
from superfractal.fractal_types import UNIT_FRAME, Frame, Point2, Raster

DENOM_EPS = 1e-12
LIPSCHITZ_GRID_CAP = 64
_DENOM_CHECK_GRID = 64

MAP_KINDS = ("affine", "projective")


@dataclass(frozen=True)
class Map2:
    kind: str
    coefficients: Tuple[float, ...]
    lipschitz_hint: Optional[float] = None
    table: Tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in MAP_KINDS:
            fail(GeometryError, f"unknown map kind {self.kind!r}; expected one of {MAP_KINDS}")
        coeffs = tuple(float(c) for c in self.coefficients)
        if not all(math.isfinite(c) for c in coeffs):
            fail(GeometryError, f"non-finite coefficient in {self.kind} map: {coeffs}")
        if self.kind == "affine":
            if len(coeffs) != 6:
                fail(GeometryError, f"affine map needs 6 coefficients (a, b, e, c, d, g), got {len(coeffs)}")
            table = coeffs + (0.0, 0.0, 1.0, 0.0, 0.0, 1.0)
        else:
            if len(coeffs) == 9:
                # shared denominator
                table = coeffs + coeffs[6:9]
            elif len(coeffs) == 12:
                table = coeffs
            else:
                fail(GeometryError, f"projective map needs 9 or 12 coefficients, got {len(coeffs)}")
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "table", table)
        if self.kind == "projective":
            _check_denominators(np.asarray(table))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.table, dtype=np.float64)

    @property
    def is_affine(self) -> bool:
        t = self.table
        return t[6] == 0.0 and t[7] == 0.0 and t[9] == 0.0 and t[10] == 0.0


def affine(a: float, b: float, e: float, c: float, d: float, g: float,
           lipschitz_hint: Optional[float] = None) -> Map2:
    """(x, y) -> (a x + b y + e, c x + d y + g)."""
    return Map2("affine", (a, b, e, c, d, g), lipschitz_hint)


def projective(num_x: Sequence[float], num_y: Sequence[float], den_x: Sequence[float],
               den_y: Optional[Sequence[float]] = None,
               lipschitz_hint: Optional[float] = None) -> Map2:
    den_y = den_x if den_y is None else den_y
    return Map2("projective", tuple(num_x) + tuple(num_y) + tuple(den_x) + tuple(den_y), lipschitz_hint)


def _unit_grid(n: int) -> np.ndarray:
    ticks = np.linspace(0.0, 1.0, n)
    xs, ys = np.meshgrid(ticks, ticks)
    return np.column_stack([xs.ravel(), ys.ravel()])


def _check_denominators(table: np.ndarray) -> None:
    pts = _unit_grid(_DENOM_CHECK_GRID)
    for row in (table[6:9], table[9:12]):
        den = row[0] * pts[:, 0] + row[1] * pts[:, 1] + row[2]
        if np.min(np.abs(den)) < DENOM_EPS or (den.min() < 0.0 < den.max()):
            fail(GeometryError, f"projective denominator {tuple(row)} vanishes on the unit square")


def apply_table(table: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Evaluate maps given as 12-coefficient rows; table is (12,) or (n, 12) against (n, 2) points."""
    t = np.atleast_2d(table)
    x = pts[:, 0]
    y = pts[:, 1]
    den_x = t[:, 6] * x + t[:, 7] * y + t[:, 8]
    den_y = t[:, 9] * x + t[:, 10] * y + t[:, 11]
    if np.any(np.abs(den_x) < DENOM_EPS) or np.any(np.abs(den_y) < DENOM_EPS):
        fail(SingularEvaluationError, "projective denominator below 1e-12 during evaluation")
    out = np.empty_like(pts, dtype=np.float64)
    out[:, 0] = (t[:, 0] * x + t[:, 1] * y + t[:, 2]) / den_x
    out[:, 1] = (t[:, 3] * x + t[:, 4] * y + t[:, 5]) / den_y
    return out


def apply_many(map2: Map2, pts: np.ndarray) -> np.ndarray:
    return apply_table(map2.as_array(), np.asarray(pts, dtype=np.float64).reshape(-1, 2))


def apply(map2: Map2, p: Point2) -> Point2:
    t = map2.table
    x, y = float(p.x), float(p.y)
    den_x = t[6] * x + t[7] * y + t[8]
    den_y = t[9] * x + t[10] * y + t[11]
    if abs(den_x) < DENOM_EPS or abs(den_y) < DENOM_EPS:
        fail(SingularEvaluationError, f"projective denominator below 1e-12 at ({x}, {y})")
    return Point2((t[0] * x + t[1] * y + t[2]) / den_x, (t[3] * x + t[4] * y + t[5]) / den_y)


def estimate_lipschitz(map2: Map2, grid_n: int = 16) -> float:
    """Largest distance ratio over pairs of a grid_n x grid_n grid on the unit square.

    A lower bound on the true constant; exact for similitudes.
    """
    if map2.lipschitz_hint is not None:
        return float(map2.lipschitz_hint)
    if grid_n < 2:
        fail(GeometryError, f"grid_n must be at least 2, got {grid_n}")
    if grid_n > LIPSCHITZ_GRID_CAP:
        logger.warning(f"grid_n={grid_n} clamped to {LIPSCHITZ_GRID_CAP}")
        grid_n = LIPSCHITZ_GRID_CAP
    pts = _unit_grid(grid_n)
    img = apply_many(map2, pts)
    best = 0.0
    block = 512
    for start in range(0, len(pts), block):
        p = pts[start:start + block]
        q = img[start:start + block]
        d_src = np.linalg.norm(p[:, None, :] - pts[None, :, :], axis=2)
        d_img = np.linalg.norm(q[:, None, :] - img[None, :, :], axis=2)
        mask = d_src > 0.0
        if np.any(mask):
            best = max(best, float(np.max(d_img[mask] / d_src[mask])))
    return best


def fixed_point(map2: Map2, tol: float = 1e-12, max_iter: int = 100_000) -> Point2:
    p = Point2(0.5, 0.5)
    for _ in range(max_iter):
        q = apply(map2, p)
        if math.hypot(q.x - p.x, q.y - p.y) <= tol:
            return q
        p = q
    q = apply(map2, p)
    if math.hypot(q.x - p.x, q.y - p.y) < 1e-10:
        return q
    fail(GeometryError, f"fixed-point iteration did not settle within {max_iter} steps")


@dataclass(frozen=True)
class Similitude2:
    scale: float
    rotation: Tuple[Tuple[float, float], Tuple[float, float]]
    translation: Tuple[float, float]

    def __post_init__(self) -> None:
        if not 0.0 < self.scale < 1.0:
            fail(GeometryError, f"similitude ratio must lie in (0, 1), got {self.scale}")
        r = np.asarray(self.rotation, dtype=np.float64)
        if not np.allclose(r.T @ r, np.eye(2), atol=1e-9):
            fail(GeometryError, f"similitude rotation part is not orthogonal: {self.rotation}")

    def to_map(self) -> Map2:
        (r00, r01), (r10, r11) = self.rotation
        s = self.scale
        return affine(s * r00, s * r01, self.translation[0], s * r10, s * r11, self.translation[1])


def similitude_from_map(map2: Map2, tol: float = 1e-9) -> Similitude2:
    t = map2.table
    if map2.is_affine:
        g1, g2 = t[8], t[11]
    elif t[6] == 0.0 and t[7] == 0.0 and t[9] == 0.0 and t[10] == 0.0:
        g1, g2 = t[8], t[11]
    else:
        fail(NotSimilitudeError, "projective map with varying denominator is not a similitude")
    a, b, c, d = t[0] / g1, t[1] / g1, t[3] / g2, t[4] / g2
    col1 = a * a + c * c
    col2 = b * b + d * d
    if abs(col1 - col2) > tol * max(col1, col2, 1.0) or abs(a * b + c * d) > tol:
        fail(NotSimilitudeError, f"linear part [[{a}, {b}], [{c}, {d}]] is not a scaled orthogonal matrix")
    s = math.sqrt(col1)
    if s == 0.0:
        fail(NotSimilitudeError, "degenerate linear part with zero scale")
    return Similitude2(s, ((a / s, b / s), (c / s, d / s)), (t[2] / g1, t[5] / g2))


# -------------------- raster coordinates --------------------

def pixel_centers(raster: Raster) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rows, cols and centre coordinates of every set pixel, row-major order."""
    rows, cols = np.nonzero(raster.bits)
    return rows, cols, centers_of(rows, cols, raster.width, raster.height, raster.frame)


def centers_of(rows: np.ndarray, cols: np.ndarray, width: int, height: int, frame: Frame) -> np.ndarray:
    xmin, ymin, xmax, ymax = frame
    dx = (xmax - xmin) / width
    dy = (ymax - ymin) / height
    pts = np.empty((len(rows), 2), dtype=np.float64)
    pts[:, 0] = xmin + (cols + 0.5) * dx
    pts[:, 1] = ymax - (rows + 0.5) * dy
    return pts


def points_to_pixels(pts: np.ndarray, width: int, height: int,
                     frame: Frame = UNIT_FRAME) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pixel (row, col) of each point and a mask of points inside the frame.

    Points on the right or bottom frame edge belong to the last column or row.
    """
    xmin, ymin, xmax, ymax = frame
    fx = (pts[:, 0] - xmin) / (xmax - xmin) * width
    fy = (ymax - pts[:, 1]) / (ymax - ymin) * height
    inside = (fx >= 0.0) & (fx <= width) & (fy >= 0.0) & (fy <= height)
    cols = np.minimum(np.floor(np.where(inside, fx, 0.0)).astype(np.int64), width - 1)
    rows = np.minimum(np.floor(np.where(inside, fy, 0.0)).astype(np.int64), height - 1)
    return rows, cols, inside


def rasterize_points(pts: np.ndarray, width: int, height: int, frame: Frame = UNIT_FRAME) -> Raster:
    out = Raster.empty(width, height, frame)
    rows, cols, inside = points_to_pixels(np.asarray(pts, dtype=np.float64).reshape(-1, 2), width, height, frame)
    out.bits[rows[inside], cols[inside]] = True
    return out


def hausdorff(r1: Raster, r2: Raster) -> float:
    """Hausdorff distance between the set pixels of two rasters, in pixel units."""
    if r1.bits.shape != r2.bits.shape:
        fail(ShapeMismatchError, f"raster shapes differ: {r1.bits.shape} vs {r2.bits.shape}")
    a = np.argwhere(r1.bits).astype(np.float64)
    b = np.argwhere(r2.bits).astype(np.float64)
    if len(a) == 0 or len(b) == 0:
        fail(EmptyRasterError, "Hausdorff distance is undefined for an empty raster")
    d_ab, _ = cKDTree(b).query(a)
    d_ba, _ = cKDTree(a).query(b)
    return float(max(d_ab.max(), d_ba.max()))
