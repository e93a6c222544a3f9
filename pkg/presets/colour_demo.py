"""Demonstration coefficients for colour stealing (N = V = 2, M = 4).

The geometry is four mildly projective quadrant maps per IFS; the palette IFS
pulls the RGB cube towards four corner colours.
"""
from typing import Sequence

import numpy as np

from superfractal.apps import PaletteIfs
from superfractal.geometry import projective
from superfractal.ifs import Ifs
from superfractal.superifs import SuperIfs

QUADRANTS = ((0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5))


def _quadrant_ifs(scale: float, tilt: float, name: str) -> Ifs:
    maps = []
    for ox, oy in QUADRANTS:
        den = (tilt, tilt, 1.0 + tilt)
        maps.append(projective((scale, 0.0, ox), (0.0, scale, oy), den))
    return Ifs(maps, [0.25] * 4, name=name)


def colour_superifs(V: int = 2, P: Sequence[float] = (0.5, 0.5)) -> SuperIfs:
    return SuperIfs([_quadrant_ifs(0.45, 0.05, "quad-a"), _quadrant_ifs(0.4, -0.02, "quad-b")],
                    list(P), V, name="colour-demo")


def colour_ifs() -> Ifs:
    return _quadrant_ifs(0.45, 0.05, "quad-a")


def corner_palette() -> PaletteIfs:
    targets = np.array([[220.0, 60.0, 40.0], [40.0, 160.0, 60.0], [30.0, 80.0, 200.0], [240.0, 200.0, 40.0]])
    linear = np.stack([0.5 * np.eye(3)] * 4)
    # fixed point of c -> c/2 + b is 2b
    return PaletteIfs(linear, 0.5 * targets, name="corners")
