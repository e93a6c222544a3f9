from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np


# (xmin, ymin, xmax, ymax); row 0 of a raster is the top edge (y = ymax).
Frame = Tuple[float, float, float, float]
UNIT_FRAME: Frame = (0.0, 0.0, 1.0, 1.0)


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=np.float64)


@dataclass(eq=False)
class Raster:
    bits: np.ndarray  # bool, shape (height, width)
    frame: Frame = UNIT_FRAME

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    def count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def copy(self) -> "Raster":
        return Raster(self.bits.copy(), self.frame)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Raster):
            return NotImplemented
        return tuple(self.frame) == tuple(other.frame) and np.array_equal(self.bits, other.bits)

    @classmethod
    def empty(cls, width: int, height: int, frame: Frame = UNIT_FRAME) -> "Raster":
        return cls(np.zeros((height, width), dtype=bool), frame)

    @classmethod
    def full(cls, width: int, height: int, frame: Frame = UNIT_FRAME) -> "Raster":
        return cls(np.ones((height, width), dtype=bool), frame)


@dataclass(eq=False)
class MeasureRaster:
    mass: np.ndarray  # float64, shape (height, width)
    frame: Frame = UNIT_FRAME

    @property
    def width(self) -> int:
        return int(self.mass.shape[1])

    @property
    def height(self) -> int:
        return int(self.mass.shape[0])

    def total(self) -> float:
        return float(self.mass.sum())

    def support(self) -> Raster:
        return Raster(self.mass > 0.0, self.frame)

    def copy(self) -> "MeasureRaster":
        return MeasureRaster(self.mass.copy(), self.frame)

    @classmethod
    def uniform(cls, width: int, height: int, frame: Frame = UNIT_FRAME) -> "MeasureRaster":
        return cls(np.full((height, width), 1.0 / (width * height)), frame)


@dataclass(frozen=True)
class Address:
    """Finite code sigma_1 ... sigma_k with 1-based map indices."""

    digits: Tuple[int, ...]

    def __len__(self) -> int:
        return len(self.digits)


@dataclass(frozen=True)
class ScreenBank:
    screens: Tuple[object, ...]  # Raster or MeasureRaster, one per screen
    generation: int = 0

    @property
    def V(self) -> int:
        return len(self.screens)


@dataclass
class Polyline:
    vertices: np.ndarray  # shape (n + 1, 2)
    addresses: List[Tuple[int, ...]] = field(default_factory=list)

    def segment_count(self) -> int:
        return int(self.vertices.shape[0]) - 1

    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.vertices, axis=0), axis=1).sum())


@dataclass(frozen=True)
class InterpolationData:
    points: Tuple[Tuple[float, float], ...]
    d: Tuple[float, ...]

    @property
    def intervals(self) -> int:
        return len(self.points) - 1


@dataclass
class LyapunovEstimate:
    gamma: float
    stderr: float
    alpha: float
    k: int
    V: int
    seed: int
    replicas: int


@dataclass
class DimensionEstimate:
    value: float
    uncertainty: float = 0.0
    residual: Optional[float] = None
    regime: str = ""
    evaluations: List[Dict[str, float]] = field(default_factory=list)
