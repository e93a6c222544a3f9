"""Applications: fractal interpolation, space-filling curves and colour stealing."""
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from superfractal import kernels
from superfractal.errors import ChainingError, GeometryError, SingularEvaluationError, fail
from superfractal.fractal_types import UNIT_FRAME, Frame, InterpolationData, Point2, Polyline
from superfractal.geometry import affine, apply, points_to_pixels
from superfractal.ifs import Ifs
from superfractal.superifs import SuperIfs, backward_expand
from superfractal.trees import CodeTree, grove_from_indices, sample_index
from superfractal.utils import draw_digits, make_rng, probability_cdf

CHAIN_TOL = 1e-9
BACKGROUND = (255, 255, 255)


# -------------------- fractal interpolation --------------------

def validate_interpolation(data: InterpolationData) -> None:
    pts = np.asarray(data.points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        fail(GeometryError, "interpolation needs at least two (x, y) points")
    if np.any(np.diff(pts[:, 0]) <= 0.0):
        fail(GeometryError, f"interpolation x values must be strictly increasing: {pts[:, 0].tolist()}")
    if len(data.d) != data.intervals:
        fail(GeometryError, f"{data.intervals} intervals need {data.intervals} vertical scalings, got {len(data.d)}")
    for d in data.d:
        if not abs(d) < 1.0:
            fail(GeometryError, f"vertical scaling {d} must satisfy |d| < 1")


def _interpolation_coefficients(data: InterpolationData) -> Tuple[np.ndarray, ...]:
    """a, e, c, g, d arrays (one entry per interval) of the maps (a x + e, c x + d y + g)."""
    validate_interpolation(data)
    pts = np.asarray(data.points, dtype=np.float64)
    x, y = pts[:, 0], pts[:, 1]
    d = np.asarray(data.d, dtype=np.float64)
    x0, xI, y0, yI = x[0], x[-1], y[0], y[-1]
    span = xI - x0
    a = (x[1:] - x[:-1]) / span
    e = (xI * x[:-1] - x0 * x[1:]) / span
    c = (y[1:] - y[:-1]) / span - d * (yI - y0) / span
    g = (xI * y[:-1] - x0 * y[1:]) / span - d * (xI * y0 - x0 * yI) / span
    return a, e, c, g, d


def build_interpolation_ifs(data: InterpolationData, probs: Optional[Sequence[float]] = None) -> Ifs:
    """Shear maps sending the whole data interval onto each subinterval, endpoints onto data points.

    The maps contract in a metric adapted to the shear rather than the Euclidean one, so the IFS is
    flagged average-contractive.
    """
    a, e, c, g, d = _interpolation_coefficients(data)
    I = data.intervals
    maps = [affine(a[m], 0.0, e[m], c[m], d[m], g[m]) for m in range(I)]
    return Ifs(maps, list(probs) if probs is not None else [1.0 / I] * I,
               name="interpolation", average_contractive=True)


def evaluate_interpolant(data: InterpolationData, xs: Sequence[float], depth: int = 16) -> np.ndarray:
    """Values of the interpolation function through its self-affine recursion, chord at the bottom."""
    _, _, c, g, d = _interpolation_coefficients(data)
    return _evaluate(data, xs, depth, lambda level, node: (c, g, d), branching=1)


def _evaluate(data: InterpolationData, xs: Sequence[float], depth: int, coeffs_at, branching: int) -> np.ndarray:
    pts = np.asarray(data.points, dtype=np.float64)
    knots = pts[:, 0]
    x0, xI, y0, yI = knots[0], knots[-1], pts[0, 1], pts[-1, 1]
    a, e, _, _, _ = _interpolation_coefficients(data)
    u = np.asarray(xs, dtype=np.float64).copy()
    if np.any(u < x0) or np.any(u > xI):
        fail(GeometryError, f"evaluation points must lie in [{x0}, {xI}]")
    acc = np.zeros_like(u)
    mult = np.ones_like(u)
    node = np.zeros(u.shape, dtype=np.int64)
    I = data.intervals
    for level in range(depth):
        m = np.clip(np.searchsorted(knots[1:-1], u, side="right"), 0, I - 1)
        c, g, d = coeffs_at(level, node)
        if c.ndim == 2:
            c, g, d = c[np.arange(len(u)), m], g[np.arange(len(u)), m], d[np.arange(len(u)), m]
        else:
            c, g, d = c[m], g[m], d[m]
        u = np.clip((u - e[m]) / a[m], x0, xI)
        acc += mult * (c * u + g)
        mult *= d
        node = node * branching + m
    chord = y0 + (yI - y0) * (u - x0) / (xI - x0)
    return acc + mult * chord


def interpolation_polyline(data: InterpolationData, depth: int = 16, samples: int = 1025) -> Polyline:
    pts = np.asarray(data.points, dtype=np.float64)
    xs = np.union1d(np.linspace(pts[0, 0], pts[-1, 0], samples), pts[:, 0])
    ys = evaluate_interpolant(data, xs, depth)
    return Polyline(np.column_stack([xs, ys]))


def interpolation_superifs(data: InterpolationData, d_options: Sequence[Sequence[float]],
                           P: Sequence[float], V: int) -> SuperIfs:
    """N interpolation IFSs sharing the data and differing in their vertical scalings."""
    ifss = [build_interpolation_ifs(InterpolationData(data.points, tuple(d))) for d in d_options]
    return SuperIfs(ifss, list(P), V, name="interpolation superIFS")


def evaluate_vvariable_interpolant(data: InterpolationData, d_options: Sequence[Sequence[float]],
                                   sigma: CodeTree, xs: Sequence[float]) -> np.ndarray:
    """Graph of the V-variable interpolant coded by sigma; node labels pick the vertical scalings."""
    rows = [_interpolation_coefficients(InterpolationData(data.points, tuple(d))) for d in d_options]
    C = np.stack([r[2] for r in rows])
    G = np.stack([r[3] for r in rows])
    D = np.stack([r[4] for r in rows])
    if sigma.M != data.intervals:
        fail(GeometryError, f"tree arity {sigma.M} differs from the {data.intervals} intervals")

    def coeffs_at(level: int, node: np.ndarray):
        n = sigma.levels[level][node] - 1
        return C[n], G[n], D[n]

    return _evaluate(data, xs, sigma.depth, coeffs_at, branching=sigma.M)


# -------------------- space-filling curves --------------------

SPACEFILL_O = Point2(0.0, 0.0)
SPACEFILL_C = Point2(1.0, 0.0)


def spacefill_superifs(V: int = 1) -> SuperIfs:
    """Two 3-map IFSs whose first-level images chain O -> A -> B -> C along the unit square's base.

    F^1 passes through A = (0, 1/2), B = (1/2, 1/2); F^2 through A and B' = (2/3, 1/2).
    The third map of each IFS is a shear: it carries the base onto the diagonal B -> C,
    so it sends the unit square to a parallelogram with vertical sides at x = B.x and x = 1,
    not to an axis-aligned rectangle.
    """
    f1 = [
        affine(0.0, 0.5, 0.0, 0.5, 0.0, 0.0),
        affine(0.5, 0.0, 0.0, 0.0, 0.5, 0.5),
        affine(0.5, 0.0, 0.5, -0.5, 0.5, 0.5),
    ]
    f2 = [
        affine(0.0, 2.0 / 3.0, 0.0, 0.5, 0.0, 0.0),
        affine(2.0 / 3.0, 0.0, 0.0, 0.0, 0.5, 0.5),
        affine(1.0 / 3.0, 0.0, 2.0 / 3.0, -0.5, 0.5, 0.5),
    ]
    ifss = [
        Ifs(f1, [1.0 / 3.0] * 3, name="spacefill-1", average_contractive=True),
        Ifs(f2, [1.0 / 3.0] * 3, name="spacefill-2", average_contractive=True),
    ]
    for f in ifss:
        check_chaining(f)
    return SuperIfs(ifss, [0.5, 0.5], V, name="spacefill")


def check_chaining(ifs: Ifs, start: Point2 = SPACEFILL_O, end: Point2 = SPACEFILL_C) -> None:
    """f_1(start) = start, f_M(end) = end and f_m(end) = f_{m+1}(start)."""
    def close(p: Point2, q: Point2) -> bool:
        return math.hypot(p.x - q.x, p.y - q.y) <= CHAIN_TOL

    if not close(apply(ifs.maps[0], start), start) or not close(apply(ifs.maps[-1], end), end):
        fail(ChainingError, f"{ifs.name}: first map must fix the start point and last map the end point")
    for m in range(ifs.M - 1):
        if not close(apply(ifs.maps[m], end), apply(ifs.maps[m + 1], start)):
            fail(ChainingError, f"{ifs.name}: image of map {m + 1} does not meet image of map {m + 2}")


def spacefill_approximant(s: SuperIfs, sigma: CodeTree, k: int) -> Polyline:
    """M**k chained segments g_b(O) -> g_b(C), one per branch b in lexicographic order."""
    starts = backward_expand(s, sigma, SPACEFILL_O, k)
    ends = backward_expand(s, sigma, SPACEFILL_C, k)
    gaps = np.hypot(*(ends[:-1] - starts[1:]).T) if len(starts) > 1 else np.zeros(0)
    if gaps.size and gaps.max() > CHAIN_TOL:
        bad = int(np.argmax(gaps))
        fail(ChainingError, f"segments {bad + 1} and {bad + 2} do not chain (gap {gaps[bad]:.3e})")
    vertices = np.vstack([starts[:1], ends])
    addresses = [tuple(int(d) + 1 for d in np.unravel_index(b, (s.M,) * k)) for b in range(s.M ** k)] if k else [()]
    return Polyline(vertices, addresses)


# -------------------- colour stealing --------------------

@dataclass
class PaletteIfs:
    """Affine maps c -> A_m c + b_m of the RGB cube [0, 255]^3."""

    linear: np.ndarray  # (M, 3, 3)
    offset: np.ndarray  # (M, 3)
    name: str = "palette"
    start: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.linear = np.asarray(self.linear, dtype=np.float64)
        self.offset = np.asarray(self.offset, dtype=np.float64)
        if self.linear.ndim != 3 or self.linear.shape[1:] != (3, 3):
            fail(GeometryError, f"palette linear parts must have shape (M, 3, 3), got {self.linear.shape}")
        if self.offset.shape != (self.linear.shape[0], 3):
            fail(GeometryError, f"palette offsets must have shape (M, 3), got {self.offset.shape}")
        for m, A in enumerate(self.linear, start=1):
            if np.linalg.norm(A, 2) >= 1.0:
                fail(GeometryError, f"{self.name}: palette map {m} is not a contraction")
        if self.start is None:
            # fixed point of the first map
            self.start = np.linalg.solve(np.eye(3) - self.linear[0], self.offset[0])
        self.start = np.asarray(self.start, dtype=np.float64)

    @property
    def M(self) -> int:
        return int(self.linear.shape[0])


def _address_key_width(M: int) -> int:
    if M <= 1:
        return 1
    return max(1, min(24, int(62 // math.log2(M))))


def colour_steal_points(ifs: Ifs, palette: PaletteIfs, seed: int, n_points: int,
                        burn_in: int = 100) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Paired orbits driven by one digit stream: (points, colours, digits) after burn-in."""
    if palette.M != ifs.M:
        fail(GeometryError, f"palette has {palette.M} maps, geometry has {ifs.M}")
    rng = make_rng(seed)
    digits = draw_digits(rng, probability_cdf(ifs.probs), n_points)
    pts = np.empty((n_points, 2), dtype=np.float64)
    x, y, status = kernels.orbit_points(ifs.table, digits, 0.5, 0.5, pts)
    if status != kernels.STATUS_OK:
        fail(SingularEvaluationError, f"singular map evaluation near ({x}, {y}) in colour stealing")
    cols = np.empty((n_points, 3), dtype=np.float64)
    kernels.palette_orbit(palette.linear, palette.offset, digits, palette.start.copy(), cols)
    return pts[burn_in:], cols[burn_in:], digits[burn_in:] + 1


def _to_rgb8(rgb: np.ndarray, filled: np.ndarray) -> np.ndarray:
    out = np.empty(rgb.shape, dtype=np.uint8)
    out[...] = BACKGROUND
    out[filled] = np.clip(np.rint(rgb[filled]), 0, 255).astype(np.uint8)
    return out


def colour_steal_render(base: Union[Ifs, SuperIfs], palette: PaletteIfs, seed: int, n_points: int,
                        width: int = 256, height: int = 256, frame: Frame = UNIT_FRAME,
                        burn_in: int = 100) -> np.ndarray:
    """RGB image (height, width, 3) whose pixels take the palette colour of their lowest address."""
    if isinstance(base, SuperIfs):
        return _colour_steal_superifs(base, palette, seed, n_points, width, height, frame)
    if palette.M != base.M:
        fail(GeometryError, f"palette has {palette.M} maps, geometry has {base.M}")
    rng = make_rng(seed)
    cdf = probability_cdf(base.probs)
    j = _address_key_width(base.M)
    top_power = base.M ** (j - 1)
    keys = np.full((height, width), -1, dtype=np.int64)
    rgb = np.zeros((height, width, 3), dtype=np.float64)
    colour = palette.start.copy()
    x, y, key = 0.5, 0.5, 0
    xmin, ymin, xmax, ymax = (float(v) for v in frame)
    chunk = 1 << 20
    for start in range(0, n_points, chunk):
        size = min(chunk, n_points - start)
        digits = draw_digits(rng, cdf, size)
        skip = max(0, max(burn_in, j) - start)
        x, y, key, status = kernels.colour_orbit(
            base.table, palette.linear, palette.offset, digits, x, y, colour, key, top_power, skip,
            keys, rgb, xmin, ymin, xmax, ymax)
        if status != kernels.STATUS_OK:
            fail(SingularEvaluationError, f"singular map evaluation near ({x}, {y}) in colour stealing")
    logger.info(f"colour stealing: {int(np.count_nonzero(keys >= 0))} pixels coloured")
    return _to_rgb8(rgb, keys >= 0)


def colour_steal_tree(s: SuperIfs, sigma: CodeTree, palette: PaletteIfs, width: int = 256,
                      height: int = 256, frame: Frame = UNIT_FRAME, depth: Optional[int] = None) -> np.ndarray:
    """Colour a code-tree expansion: branch b gets the palette point with the same address digits."""
    if palette.M != s.M:
        fail(GeometryError, f"palette has {palette.M} maps, geometry has {s.M}")
    k = sigma.depth if depth is None else int(depth)
    centre = Point2(0.5 * (frame[0] + frame[2]), 0.5 * (frame[1] + frame[3]))
    pts = backward_expand(s, sigma, centre, k)
    branches = np.arange(s.M ** k)
    cols = np.tile(palette.start, (s.M ** k, 1))
    for l in reversed(range(k)):
        digit = (branches // s.M ** (k - l - 1)) % s.M
        cols = np.einsum("nij,nj->ni", palette.linear[digit], cols) + palette.offset[digit]
    rows, cs, inside = points_to_pixels(pts, width, height, frame)
    flat = (rows * width + cs)[inside]
    # branches are in lexicographic order, so the first hit of a pixel is its lowest address
    uniq, first = np.unique(flat, return_index=True)
    rgb = np.zeros((height * width, 3), dtype=np.float64)
    filled = np.zeros(height * width, dtype=bool)
    rgb[uniq] = cols[inside][first]
    filled[uniq] = True
    return _to_rgb8(rgb.reshape(height, width, 3), filled.reshape(height, width))


def _colour_steal_superifs(s: SuperIfs, palette: PaletteIfs, seed: int, n_points: int,
                           width: int, height: int, frame: Frame) -> np.ndarray:
    depth = max(1, int(math.floor(math.log(max(n_points, 2)) / math.log(max(s.M, 2)))))
    rng = make_rng(seed)
    indices = [sample_index(s.N, s.V, s.M, s.probs, rng) for _ in range(depth)]
    sigma = grove_from_indices(indices, max_depth=depth)[0]
    return colour_steal_tree(s, sigma, palette, width, height, frame, depth)
