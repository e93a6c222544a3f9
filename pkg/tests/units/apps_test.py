import math

import numpy as np
import pytest

from presets.colour_demo import colour_ifs, colour_superifs, corner_palette
from presets.sierpinski import CORNERS, sierpinski_ifs
from superfractal.apps import (
    PaletteIfs,
    build_interpolation_ifs,
    check_chaining,
    colour_steal_points,
    colour_steal_render,
    colour_steal_tree,
    evaluate_interpolant,
    evaluate_vvariable_interpolant,
    interpolation_polyline,
    interpolation_superifs,
    spacefill_approximant,
    spacefill_superifs,
)
from superfractal.errors import ChainingError, GeometryError
from superfractal.fractal_types import InterpolationData, Point2
from superfractal.geometry import affine, apply
from superfractal.ifs import Ifs
from superfractal.superifs import SuperIfs
from superfractal.trees import CodeTree, grove_from_indices, sample_index

HAT = InterpolationData(((0.0, 0.0), (0.5, 1.0), (1.0, 0.0)), (0.3, 0.3))


def test_interpolation_maps_hit_data_points():
    ifs = build_interpolation_ifs(HAT)
    assert ifs.M == 2 and ifs.average_contractive
    pts = [Point2(*p) for p in HAT.points]
    for m, f in enumerate(ifs.maps):
        start, end = apply(f, pts[0]), apply(f, pts[-1])
        assert (start.x, start.y) == pytest.approx(HAT.points[m], abs=1e-12)
        assert (end.x, end.y) == pytest.approx(HAT.points[m + 1], abs=1e-12)
    # neighbouring pieces join at the shared point
    a, b = apply(ifs.maps[0], pts[-1]), apply(ifs.maps[1], pts[0])
    assert (a.x, a.y) == pytest.approx((b.x, b.y), abs=1e-12)


def test_interpolant_passes_through_hat():
    ys = evaluate_interpolant(HAT, [0.0, 0.5, 1.0])
    assert ys == pytest.approx([0.0, 1.0, 0.0], abs=1e-6)


def test_collinear_data_gives_chord():
    data = InterpolationData(((0.0, 0.0), (0.3, 0.3), (1.0, 1.0)), (0.0, 0.0))
    xs = np.linspace(0.0, 1.0, 101)
    assert evaluate_interpolant(data, xs) == pytest.approx(xs, abs=1e-12)


def test_random_data_interpolated():
    rng = np.random.default_rng(13)
    for _ in range(100):
        I = int(rng.integers(1, 6))
        xs = np.concatenate([[rng.uniform(-2.0, 2.0)], rng.uniform(0.5, 1.5, size=I)]).cumsum()
        ys = rng.normal(size=I + 1)
        d = tuple(float(v) for v in rng.uniform(0.0, 0.2, size=I))
        data = InterpolationData(tuple(zip(xs.tolist(), ys.tolist())), d)
        assert evaluate_interpolant(data, xs, depth=16) == pytest.approx(ys, abs=1e-6)


def test_interpolation_graph_is_a_function():
    line = interpolation_polyline(HAT, depth=16, samples=257)
    xs = line.vertices[:, 0]
    assert np.all(np.diff(xs) > 0.0)
    assert tuple(line.vertices[0]) == pytest.approx((0.0, 0.0), abs=1e-9)
    assert tuple(line.vertices[-1]) == pytest.approx((1.0, 0.0), abs=1e-9)
    assert 0.5 in xs.tolist()


def test_interpolation_validation():
    with pytest.raises(GeometryError):
        build_interpolation_ifs(InterpolationData(((0.0, 0.0), (0.0, 1.0)), (0.2,)))
    with pytest.raises(GeometryError):
        build_interpolation_ifs(InterpolationData(((0.0, 0.0), (1.0, 1.0)), (0.2, 0.2)))
    with pytest.raises(GeometryError):
        build_interpolation_ifs(InterpolationData(((0.0, 0.0), (1.0, 1.0)), (1.0,)))
    with pytest.raises(GeometryError):
        evaluate_interpolant(HAT, [1.5])


def test_vvariable_interpolant():
    d_options = [(0.3, 0.3), (-0.3, 0.5)]
    s = interpolation_superifs(HAT, d_options, [0.5, 0.5], V=2)
    assert (s.N, s.M, s.V) == (2, 2, 2)
    rng = np.random.default_rng(21)
    indices = [sample_index(2, 2, 2, [0.5, 0.5], rng) for _ in range(16)]
    sigma = grove_from_indices(indices)[0]
    knots = [0.0, 0.5, 1.0]
    assert evaluate_vvariable_interpolant(HAT, d_options, sigma, knots) == pytest.approx([0.0, 1.0, 0.0], abs=1e-6)

    xs = rng.uniform(0.0, 1.0, size=50)
    constant = CodeTree.constant(2, 12, 1)
    assert np.allclose(evaluate_vvariable_interpolant(HAT, d_options, constant, xs),
                       evaluate_interpolant(HAT, xs, depth=12), rtol=0.0, atol=1e-12)
    with pytest.raises(GeometryError):
        evaluate_vvariable_interpolant(HAT, d_options, CodeTree.constant(3, 2, 1), xs)


def test_spacefill_maps():
    s = spacefill_superifs()
    C = Point2(1.0, 0.0)
    assert apply(s.ifss[0].maps[0], C) == Point2(0.0, 0.5)
    assert apply(s.ifss[1].maps[0], C) == Point2(0.0, 0.5)
    assert all(f.average_contractive for f in s.ifss)
    assert s.probs == [0.5, 0.5]


@pytest.mark.parametrize("n, bx", [(0, 0.5), (1, 2.0 / 3.0)])
def test_spacefill_third_map_is_a_shear_inside_the_square(n, bx):
    f3 = spacefill_superifs().ifss[n].maps[2]
    corners = [apply(f3, Point2(x, y)) for x, y in ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0))]
    expected = [(bx, 0.5), (1.0, 0.0), (bx, 1.0), (1.0, 0.5)]
    assert [(p.x, p.y) for p in corners] == [pytest.approx(e, abs=1e-12) for e in expected]
    assert all(-1e-12 <= p.x <= 1.0 + 1e-12 and -1e-12 <= p.y <= 1.0 + 1e-12 for p in corners)


def test_spacefill_first_level():
    s = spacefill_superifs()
    line = spacefill_approximant(s, CodeTree.constant(3, 1, 1), 1)
    assert line.vertices.tolist() == pytest.approx([[0.0, 0.0], [0.0, 0.5], [0.5, 0.5], [1.0, 0.0]])
    assert line.addresses == [(1,), (2,), (3,)]
    assert line.length() == pytest.approx(1.0 + math.sqrt(0.5))


def test_spacefill_endpoints_fixed():
    s = spacefill_superifs(V=2)
    rng = np.random.default_rng(4)
    for k in range(0, 6):
        indices = [sample_index(2, 2, 3, [0.5, 0.5], rng) for _ in range(max(k, 1))]
        sigma = grove_from_indices(indices)[0]
        line = spacefill_approximant(s, sigma, k)
        assert line.segment_count() == 3 ** k
        assert tuple(line.vertices[0]) == pytest.approx((0.0, 0.0), abs=1e-12)
        assert tuple(line.vertices[-1]) == pytest.approx((1.0, 0.0), abs=1e-12)
        assert len(line.addresses) == 3 ** k


def test_broken_chain_rejected():
    loose = Ifs([affine(0.5, 0.0, 0.0, 0.0, 0.5, 0.0), affine(0.5, 0.0, 0.6, 0.0, 0.5, 0.0)], [0.5, 0.5])
    with pytest.raises(ChainingError):
        check_chaining(loose)
    s = SuperIfs([loose], [1.0], 1)
    with pytest.raises(ChainingError):
        spacefill_approximant(s, CodeTree.constant(2, 1, 1), 1)


def _constant_palette(colours) -> PaletteIfs:
    colours = np.asarray(colours, dtype=np.float64)
    return PaletteIfs(np.zeros((len(colours), 3, 3)), colours)


def test_constant_palette_paints_red():
    red = _constant_palette([[255.0, 0.0, 0.0]] * 3)
    img = colour_steal_render(sierpinski_ifs(), red, seed=1, n_points=50_000, width=64, height=64)
    assert img.shape == (64, 64, 3) and img.dtype == np.uint8
    painted = np.any(img != 255, axis=2)
    assert painted.sum() > 0
    assert np.all(img[painted] == [255, 0, 0])


def test_palette_arity_checked():
    with pytest.raises(GeometryError):
        colour_steal_render(sierpinski_ifs(), corner_palette(), seed=1, n_points=1000)
    with pytest.raises(GeometryError):
        PaletteIfs(np.stack([np.eye(3)] * 2), np.zeros((2, 3)))


def test_paired_orbits_share_addresses():
    linear = np.stack([0.5 * np.eye(3)] * 3)
    offset = np.array([[0.5 * 255.0 * fx, 0.5 * 255.0 * fy, 0.0] for fx, fy in CORNERS])
    palette = PaletteIfs(linear, offset)
    pts, cols, digits = colour_steal_points(sierpinski_ifs(), palette, seed=3, n_points=5000)
    assert pts.shape == (4900, 2) and cols.shape == (4900, 3)
    assert set(np.unique(digits).tolist()) <= {1, 2, 3}
    assert np.allclose(cols[:, :2], 255.0 * pts, atol=1e-6)
    assert np.all(cols[:, 2] == 0.0)


def test_colour_tree_uses_lowest_address_digit():
    s = SuperIfs([sierpinski_ifs()], [1.0], 1)
    palette = _constant_palette([[255.0, 0.0, 0.0], [0.0, 255.0, 0.0], [0.0, 0.0, 255.0]])
    img = colour_steal_tree(s, CodeTree.constant(3, 6, 1), palette, width=64, height=64)
    painted = np.any(img != 255, axis=2)
    assert np.all(img[32:, :32][painted[32:, :32]] == [255, 0, 0])
    assert np.all(img[32:, 32:][painted[32:, 32:]] == [0, 255, 0])
    assert np.all(img[:32, :32][painted[:32, :32]] == [0, 0, 255])
    assert not painted[:32, 32:].any()


def test_colour_stealing_reproducible():
    s = colour_superifs(V=2)
    a = colour_steal_render(s, corner_palette(), seed=5, n_points=4096, width=48, height=48)
    b = colour_steal_render(s, corner_palette(), seed=5, n_points=4096, width=48, height=48)
    assert np.array_equal(a, b)
    assert np.any(a != 255)


def test_colour_stealing_single_ifs():
    img = colour_steal_render(colour_ifs(), corner_palette(), seed=8, n_points=20_000, width=32, height=32)
    assert img.shape == (32, 32, 3)
    painted = np.any(img != 255, axis=2)
    assert painted.sum() > 32
