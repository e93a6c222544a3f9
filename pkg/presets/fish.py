"""The jumping-fish superIFS: two IFSs of two affine maps acting on the diamond ABCD."""
from typing import Sequence

from superfractal.fractal_types import Point2
from superfractal.geometry import Map2, affine
from superfractal.ifs import Ifs
from superfractal.superifs import SuperIfs

A = Point2(0.25, 0.5)
B = Point2(0.5, 0.75)
C = Point2(0.75, 0.5)
D = Point2(0.5, 0.25)
B1 = Point2(9 / 32, 23 / 32)
B2 = Point2(23 / 32, 23 / 32)
B3 = Point2(9 / 32, 9 / 32)
B4 = Point2(23 / 32, 9 / 32)


def fish_maps() -> dict:
    """Keyed (m, n): map m of IFS n."""
    return {
        (1, 1): affine(0.5, -0.375, 5 / 16, 0.5, 0.375, 3 / 16),
        (2, 1): affine(0.5, 0.375, 3 / 16, -0.5, 0.375, 11 / 16),
        (1, 2): affine(0.5, -0.375, 5 / 16, -0.5, -0.375, 13 / 16),
        (2, 2): affine(0.5, 0.375, 3 / 16, 0.5, -0.375, 5 / 16),
    }


# (map key, point, image) for the twelve point relations on the triangle ABC
FISH_RELATIONS = (
    ((1, 1), A, A), ((1, 1), B, B1), ((1, 1), C, B),
    ((2, 1), A, B), ((2, 1), B, B2), ((2, 1), C, C),
    ((1, 2), A, A), ((1, 2), B, B3), ((1, 2), C, D),
    ((2, 2), A, D), ((2, 2), B, B4), ((2, 2), C, C),
)


def fish_ifs(n: int, probs: Sequence[float] = (0.5, 0.5)) -> Ifs:
    maps = fish_maps()
    return Ifs([maps[(1, n)], maps[(2, n)]], list(probs), name=f"fish-{n}")


def fish_superifs(V: int = 2, P: Sequence[float] = (0.5, 0.5)) -> SuperIfs:
    return SuperIfs([fish_ifs(1), fish_ifs(2)], list(P), V, name="fish")


def texfish_ifs() -> Ifs:
    """One IFS built from f_1^1, f_2^1 and f_2^2 with probabilities 0.36, 0.28, 0.36."""
    maps = fish_maps()
    chosen: Sequence[Map2] = [maps[(1, 1)], maps[(2, 1)], maps[(2, 2)]]
    return Ifs(list(chosen), [0.36, 0.28, 0.36], name="texfish")
