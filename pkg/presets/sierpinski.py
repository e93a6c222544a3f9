"""Right-angle Sierpinski systems with fixed points (0, 0), (1, 0) and (0, 1).

Ratios 1/2 and 1/3 both align with pixel grids (power-of-two and power-of-three
sides), so pixel-centre rendering of their attractors is exact.
"""
from typing import Optional, Sequence

from superfractal.geometry import affine
from superfractal.ifs import Ifs
from superfractal.superifs import SuperIfs

CORNERS = ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0))


def corner_ifs(ratio: float, probs: Optional[Sequence[float]] = None, name: str = "") -> Ifs:
    maps = [
        affine(ratio, 0.0, (1.0 - ratio) * fx, 0.0, ratio, (1.0 - ratio) * fy, lipschitz_hint=ratio)
        for fx, fy in CORNERS
    ]
    probs = [1.0 / 3.0] * 3 if probs is None else list(probs)
    return Ifs(maps, probs, name=name or f"sierpinski-{ratio:g}")


def sierpinski_ifs(probs: Optional[Sequence[float]] = None) -> Ifs:
    return corner_ifs(0.5, probs, "sierpinski")


def third_ifs(probs: Optional[Sequence[float]] = None) -> Ifs:
    return corner_ifs(1.0 / 3.0, probs, "sierpinski-third")


def sierpinski_superifs(V: int = 1, P: Sequence[float] = (0.5, 0.5)) -> SuperIfs:
    """F^1 with ratio 1/2 and F^2 with ratio 1/3; the standard table for the dimension regimes."""
    return SuperIfs([sierpinski_ifs(), third_ifs()], list(P), V, name="sierpinski-half-third")


def sierpinski_pair_superifs(V: int = 2, P: Sequence[float] = (0.5, 0.5)) -> SuperIfs:
    """Two ratio-1/2 IFSs whose fixed points sit on different corner triples; both dyadic."""
    other = [
        affine(0.5, 0.0, 0.5, 0.0, 0.5, 0.5, lipschitz_hint=0.5),
        affine(0.5, 0.0, 0.5, 0.0, 0.5, 0.0, lipschitz_hint=0.5),
        affine(0.5, 0.0, 0.0, 0.0, 0.5, 0.5, lipschitz_hint=0.5),
    ]
    return SuperIfs([sierpinski_ifs(), Ifs(other, [1.0 / 3.0] * 3, name="sierpinski-flipped")],
                    list(P), V, name="sierpinski-pair")
