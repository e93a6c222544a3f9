import math

import numpy as np
import pytest

from presets.fish import fish_superifs
from presets.sierpinski import sierpinski_ifs, sierpinski_superifs
from superfractal.errors import BracketError, DegenerateFitError, GeometryError, NotSimilitudeError
from superfractal.fractal_types import Raster
from superfractal.dimension import (
    ScaleTable,
    box_counts,
    box_dimension,
    default_box_sizes,
    estimate_dimension,
    flow_matrix,
    homogeneous_dimension,
    homogeneous_objective,
    lyapunov,
    moran_dimension,
    moran_objective,
    random_dimension,
    random_objective,
    scale_table,
    vvariable_dimension,
)
from superfractal.ifs import deterministic_attractor
from superfractal.trees import IndexA

HALF_THIRD = ScaleTable(((0.5, 0.5, 0.5), (1 / 3, 1 / 3, 1 / 3)))
HOMOGENEOUS = 2.0 * math.log(3.0) / math.log(6.0)


def test_moran_dimension():
    assert moran_dimension([0.5, 0.5, 0.5]) == pytest.approx(1.584962500721156, abs=1e-9)
    assert moran_dimension([1 / 3] * 3) == pytest.approx(1.0, abs=1e-9)
    assert moran_dimension([0.5]) == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(GeometryError):
        moran_dimension([0.5, 1.0])
    with pytest.raises(GeometryError):
        moran_dimension([])


def test_random_and_homogeneous_dimension():
    assert random_dimension(HALF_THIRD, [0.5, 0.5]) == pytest.approx(1.262, abs=1e-3)
    assert homogeneous_dimension(HALF_THIRD, [0.5, 0.5]) == pytest.approx(HOMOGENEOUS, abs=1e-9)
    # a point mass on one IFS gives its own similarity dimension
    assert random_dimension(HALF_THIRD, [1.0, 0.0]) == pytest.approx(math.log(3) / math.log(2), abs=1e-9)
    with pytest.raises(GeometryError):
        random_dimension(HALF_THIRD, [0.5, 0.4])
    with pytest.raises(GeometryError):
        homogeneous_dimension(HALF_THIRD, [1.0])


def test_scale_table():
    table = scale_table(sierpinski_superifs())
    assert table.rows[0] == pytest.approx((0.5, 0.5, 0.5))
    assert table.rows[1] == pytest.approx((1 / 3, 1 / 3, 1 / 3))
    assert scale_table(sierpinski_ifs()).N == 1
    with pytest.raises(NotSimilitudeError):
        scale_table(fish_superifs())
    with pytest.raises(GeometryError):
        ScaleTable(((0.5, 0.5), (0.5,)))


def test_flow_matrix():
    a = IndexA.from_rows([(1, 1, 1, 2), (2, 2, 2, 2)])
    fm = flow_matrix(a, HALF_THIRD, 1.0)
    assert fm.matrix == pytest.approx(np.array([[1.0, 0.5], [0.0, 1.0]]))
    assert flow_matrix(a, HALF_THIRD, 0.0).matrix.sum() == pytest.approx(6.0)
    with pytest.raises(GeometryError):
        flow_matrix(IndexA.from_rows([(3, 1, 1, 1)]), HALF_THIRD, 1.0)


def test_lyapunov_at_zero_counts_branches():
    est = lyapunov(HALF_THIRD, [0.5, 0.5], 1, 0.0, 500, seed=1, replicas=2)
    assert est.gamma == pytest.approx(math.log(3.0), abs=1e-9)
    assert est.V == 1 and est.k == 500


def test_lyapunov_reproducible_per_seed():
    a = lyapunov(HALF_THIRD, [0.5, 0.5], 4, 1.2, 2000, seed=9, replicas=4)
    b = lyapunov(HALF_THIRD, [0.5, 0.5], 4, 1.2, 2000, seed=9, replicas=4)
    c = lyapunov(HALF_THIRD, [0.5, 0.5], 4, 1.2, 2000, seed=10, replicas=4)
    assert a.gamma == b.gamma
    assert a.gamma != c.gamma
    assert a.stderr > 0.0


def test_single_screen_matches_homogeneous():
    est = vvariable_dimension(HALF_THIRD, [0.5, 0.5], 1, 20_000, seed=4, tol=1e-4, replicas=8)
    assert est.regime == "vvariable"
    assert est.value == pytest.approx(HOMOGENEOUS, abs=5e-3)
    assert est.evaluations
    assert {"alpha", "gamma_estimate", "stderr", "k", "V", "seed"} <= set(est.evaluations[0])


def test_vvariable_between_extremes():
    random = random_dimension(HALF_THIRD, [0.5, 0.5])
    est = vvariable_dimension(HALF_THIRD, [0.5, 0.5], 8, 5_000, seed=6, tol=1e-3, replicas=4)
    assert HOMOGENEOUS - 0.01 <= est.value <= random + 0.01


def test_vvariable_needs_growth():
    with pytest.raises(BracketError):
        vvariable_dimension(ScaleTable(((0.5,),)), [1.0], 2, 100, seed=0)


def test_estimate_dimension_regimes():
    s = sierpinski_superifs()
    assert estimate_dimension("deterministic", sierpinski_ifs()).value == pytest.approx(math.log(3) / math.log(2))
    assert estimate_dimension("random", s).value == pytest.approx(1.262, abs=1e-3)
    assert estimate_dimension("homogeneous", s, P=[0.5, 0.5]).value == pytest.approx(HOMOGENEOUS)
    with pytest.raises(GeometryError):
        estimate_dimension("deterministic", s)
    with pytest.raises(GeometryError):
        estimate_dimension("fractional", s)


@pytest.mark.parametrize("regime, system", [
    ("deterministic", sierpinski_ifs()),
    ("random", sierpinski_superifs()),
    ("homogeneous", sierpinski_superifs()),
])
def test_closed_form_residual_is_computed(regime, system):
    est = estimate_dimension(regime, system)
    table = scale_table(system)
    P = system.probs if regime != "deterministic" else [1.0]
    objective = {
        "deterministic": lambda D: moran_objective(table.rows[0], D),
        "random": lambda D: random_objective(table, P, D),
        "homogeneous": lambda D: homogeneous_objective(table, P, D),
    }[regime]
    assert est.residual == objective(est.value)
    assert abs(est.residual) < 1e-10


def test_objectives_strictly_decrease():
    table = HALF_THIRD
    P = [0.3, 0.7]
    grid = np.linspace(0.0, 5.0, 201)
    for objective in (lambda D: random_objective(table, P, D),
                      lambda D: homogeneous_objective(table, P, D),
                      lambda D: moran_objective(table.rows[0], D)):
        values = np.array([objective(D) for D in grid])
        assert np.all(np.diff(values) < 0.0)


def test_box_counts_of_full_square():
    r = Raster.full(8, 8)
    assert box_counts(r, [1, 2, 4]).tolist() == [64, 16, 4]
    assert default_box_sizes(Raster.full(64, 32)) == [1, 2, 4, 8]
    slope, r2 = box_dimension(Raster.full(64, 64))
    assert slope == pytest.approx(2.0)
    assert r2 == pytest.approx(1.0)


def test_box_dimension_of_sierpinski():
    r = deterministic_attractor(sierpinski_ifs(), Raster.full(1024, 1024), 30)
    slope, r2 = box_dimension(r)
    assert slope == pytest.approx(math.log(3) / math.log(2), abs=0.05)
    assert r2 > 0.99


def test_box_dimension_errors():
    with pytest.raises(DegenerateFitError):
        box_dimension(Raster.empty(32, 32))
    dot = Raster.empty(32, 32)
    dot.bits[3, 3] = True
    with pytest.raises(DegenerateFitError):
        box_dimension(dot)
    with pytest.raises(GeometryError):
        box_dimension(Raster.full(32, 32), [1, 2])
