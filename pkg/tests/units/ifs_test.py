import math

import numpy as np
import pytest

from presets.fish import texfish_ifs
from presets.sierpinski import sierpinski_ifs
from superfractal.errors import GeometryError
from superfractal.fractal_types import Address, Point2, Raster
from superfractal.geometry import affine, apply, hausdorff
from superfractal.ifs import (
    Ifs,
    address_point,
    cell_masses,
    chaos_counts,
    chaos_game,
    chaos_game_measure,
    chaos_game_points,
    cylinder_addresses,
    deterministic_attractor,
    deterministic_texture,
    hutchinson_set,
    shift_cylinder_measure,
)


def _halving() -> Ifs:
    return Ifs([affine(0.5, 0.0, 0.0, 0.0, 0.5, 0.0)], [1.0], name="halving")


def test_ifs_validation():
    f = affine(0.5, 0.0, 0.0, 0.0, 0.5, 0.0)
    with pytest.raises(GeometryError):
        Ifs([f, f], [0.5, 0.4])
    with pytest.raises(GeometryError):
        Ifs([f], [0.5, 0.5])
    stretch = affine(1.5, 0.0, 0.0, 0.0, 0.5, 0.0)
    with pytest.raises(GeometryError):
        Ifs([stretch, f], [0.5, 0.5])
    assert Ifs([stretch, f], [0.5, 0.5], average_contractive=True).M == 2


def test_hutchinson_of_full_square():
    out = hutchinson_set(sierpinski_ifs(), Raster.full(64, 64))
    expected = np.ones((64, 64), dtype=bool)
    expected[:32, 32:] = False  # top-right quadrant is the only gap
    assert np.array_equal(out.bits, expected)
    assert out.frame == (0.0, 0.0, 1.0, 1.0)


def test_hutchinson_keeps_fixed_point_pixel():
    r = Raster.empty(64, 64)
    r.bits[63, 0] = True
    assert hutchinson_set(_halving(), r) == r


def test_hutchinson_is_monotone():
    rng = np.random.default_rng(5)
    ifs = texfish_ifs()
    small = Raster(rng.random((48, 48)) < 0.1)
    big = Raster(small.bits | (rng.random((48, 48)) < 0.2))
    out_small = hutchinson_set(ifs, small)
    out_big = hutchinson_set(ifs, big)
    assert not np.any(out_small.bits & ~out_big.bits)


def test_deterministic_attractor_exact_sierpinski():
    r0 = Raster.full(256, 256)
    assert deterministic_attractor(sierpinski_ifs(), r0, 0) == r0
    a30 = deterministic_attractor(sierpinski_ifs(), r0, 30)
    assert a30.count() == 3 ** 8
    assert hutchinson_set(sierpinski_ifs(), a30) == a30


def test_deterministic_attractor_is_stable():
    r0 = Raster.full(256, 256)
    a30 = deterministic_attractor(sierpinski_ifs(), r0, 30, stop_early=False)
    a31 = deterministic_attractor(sierpinski_ifs(), r0, 31, stop_early=False)
    assert a30 == a31


def test_attractor_independent_of_start():
    ifs = sierpinski_ifs()
    seed = Raster.empty(256, 256)
    seed.bits[128, 128] = True
    a = deterministic_attractor(ifs, Raster.full(256, 256), 30)
    b = deterministic_attractor(ifs, seed, 30)
    assert hausdorff(a, b) <= 2.0


def test_negative_iterations_rejected():
    with pytest.raises(GeometryError):
        deterministic_attractor(sierpinski_ifs(), Raster.full(8, 8), -1)


def test_texture_support_matches_attractor():
    ifs = texfish_ifs()
    labels = np.zeros((96, 96), dtype=np.int64)
    labels[:, :48] = 1
    labels[:, 48:] = 2
    tex = deterministic_texture(ifs, labels, 12)
    plain = deterministic_attractor(ifs, Raster.full(96, 96), 12, stop_early=False)
    assert np.array_equal(tex > 0, plain.bits)
    assert set(np.unique(tex).tolist()) <= {0, 1, 2}


def test_chaos_game_matches_deterministic_oracle():
    ifs = sierpinski_ifs()
    oracle = deterministic_attractor(ifs, Raster.full(256, 256), 30)
    chaos = chaos_game(ifs, seed=7, n_points=1_000_000, burn_in=100, width=256, height=256)
    covered = np.count_nonzero(chaos.bits & oracle.bits) / oracle.count()
    extra = np.count_nonzero(chaos.bits & ~oracle.bits) / oracle.count()
    assert covered >= 0.99
    assert extra <= 0.005


def test_chaos_game_reproducible():
    ifs = texfish_ifs()
    a = chaos_game_points(ifs, seed=42, n_points=20_000)
    b = chaos_game_points(ifs, seed=42, n_points=20_000)
    c = chaos_game_points(ifs, seed=43, n_points=20_000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_chaos_game_contracts_to_fixed_point():
    pts = chaos_game_points(_halving(), seed=1, n_points=200, burn_in=20)
    assert pts.shape == (180, 2)
    assert np.all(np.hypot(pts[:, 0], pts[:, 1]) <= 2.0 ** -20 * math.sqrt(2.0))
    with pytest.raises(GeometryError):
        chaos_game_points(_halving(), seed=1, n_points=10, burn_in=10)


def test_single_map_measure_is_a_point_mass():
    mu = chaos_game_measure(_halving(), seed=3, n_points=5_000, burn_in=50, width=32, height=32)
    assert mu.total() == pytest.approx(1.0, abs=1e-12)
    assert mu.mass[31, 0] == pytest.approx(1.0)


def test_measure_cells_match_probabilities():
    ifs = sierpinski_ifs([0.6, 0.2, 0.2])
    attractor = deterministic_attractor(ifs, Raster.full(256, 256), 30)
    mu = chaos_game_measure(ifs, seed=11, n_points=1_000_000, burn_in=100, width=256, height=256)
    masses = cell_masses(mu, ifs, attractor)
    assert masses == pytest.approx([0.6, 0.2, 0.2], abs=0.01)
    assert sum(masses) == pytest.approx(1.0, abs=1e-9)


def test_similarity_probabilities_give_uniform_visits():
    ifs = sierpinski_ifs()
    oracle = deterministic_attractor(ifs, Raster.full(128, 128), 30)
    counts = chaos_counts(ifs, seed=2, n_points=2_000_000, burn_in=100, width=128, height=128)
    visited = counts[oracle.bits]
    assert visited.min() > 0
    assert visited.max() / visited.min() < 3.0


def test_address_point():
    ifs = sierpinski_ifs()
    centroid = Point2(1.0 / 3.0, 1.0 / 3.0)
    p = address_point(ifs, Address((1, 2)), centroid)
    q = apply(ifs.maps[0], apply(ifs.maps[1], centroid))
    assert (p.x, p.y) == (q.x, q.y)
    assert (p.x, p.y) == pytest.approx((1.0 / 3.0, 1.0 / 12.0))


def test_address_point_forgets_start():
    ifs = sierpinski_ifs()
    rng = np.random.default_rng(9)
    for _ in range(100):
        digits = tuple(int(d) for d in rng.integers(1, 4, size=20))
        a = address_point(ifs, Address(digits), Point2(0.0, 0.0))
        b = address_point(ifs, Address(digits), Point2(1.0, 1.0))
        assert math.hypot(a.x - b.x, a.y - b.y) <= 2.0 ** -20 * math.sqrt(2.0) + 1e-15
        # prefixes form a Cauchy sequence with ratio 1/2
        short = address_point(ifs, Address(digits[:10]), Point2(0.5, 0.5))
        assert math.hypot(a.x - short.x, a.y - short.y) <= 2.0 ** -10 * math.sqrt(2.0)


def test_address_digit_out_of_range():
    with pytest.raises(GeometryError):
        address_point(sierpinski_ifs(), Address((1, 4)), Point2(0.0, 0.0))


def test_address_point_rejects_empty_address():
    with pytest.raises(GeometryError, match="length >= 1"):
        address_point(sierpinski_ifs(), Address(()), Point2(0.5, 0.5))


def test_shift_cylinder_measure():
    two = Ifs([affine(0.5, 0.0, 0.0, 0.0, 0.5, 0.0), affine(0.5, 0.0, 0.5, 0.0, 0.5, 0.0)], [0.5, 0.5])
    assert shift_cylinder_measure(two, Address((1, 2))) == pytest.approx(0.25)
    skewed = Ifs(two.maps, [0.74, 0.26])
    assert shift_cylinder_measure(skewed, Address((2,))) == pytest.approx(0.26)
    assert shift_cylinder_measure(skewed, Address(())) == 1.0


def test_cylinder_addresses_lexicographic():
    assert list(cylinder_addresses(2, 0)) == [()]
    assert list(cylinder_addresses(2, 2)) == [(1, 1), (1, 2), (2, 1), (2, 2)]
