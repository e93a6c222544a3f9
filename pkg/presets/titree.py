"""Ti-tree superIFS: two IFSs of two projective maps, M = N = V = 2.

The y-denominator of every map is the negation of its x-denominator.
"""
from typing import Sequence

from superfractal.geometry import Map2, projective
from superfractal.ifs import Ifs
from superfractal.superifs import SuperIfs


def _ti_map(num_x: Sequence[float], num_y: Sequence[float], den: Sequence[float],
            flip_y: bool) -> Map2:
    den_y = tuple(-c for c in den) if flip_y else tuple(den)
    return projective(num_x, num_y, den, den_y)


def titree_maps() -> dict:
    return {
        (1, 1): _ti_map((1.629, 0.135, -1.99), (0.505, 1.935, -0.216), (-0.780, 0.864, -2.569), True),
        (2, 1): _ti_map((1.616, -2.758, 3.678), (2.151, 0.567, 2.020), (1.664, -0.944, 3.883), False),
        (1, 2): _ti_map((1.667, 0.098, -2.005), (0.563, 2.064, -0.278), (-0.773, 0.790, -2.575), True),
        (2, 2): _ti_map((1.470, -2.193, 3.035), (1.212, 0.686, 2.059), (2.432, -0.581, 2.872), False),
    }


def titree_superifs(V: int = 2, P: Sequence[float] = (0.5, 0.5),
                    probs: Sequence[float] = (0.5, 0.5)) -> SuperIfs:
    maps = titree_maps()
    ifss = [
        Ifs([maps[(1, n)], maps[(2, n)]], list(probs), name=f"titree-{n}", average_contractive=True)
        for n in (1, 2)
    ]
    return SuperIfs(ifss, list(P), V, name="titree")


def titree_measure_superifs(V: int = 2) -> SuperIfs:
    """Same maps with map probabilities 0.74 and 0.26 in both IFSs."""
    return titree_superifs(V, (0.5, 0.5), (0.74, 0.26))
