"""Netpbm image output and input through Pillow."""
from typing import Optional

import numpy as np
from loguru import logger
from PIL import Image

from superfractal.errors import ConfigError, GeometryError, fail
from superfractal.fractal_types import UNIT_FRAME, Frame, MeasureRaster, Raster
from superfractal.ifs import measure_to_gray as gamma_gray

GRAY_MODES = ("gamma", "saturate")


def raster_to_gray(raster: Raster) -> np.ndarray:
    """Set pixels black on white."""
    return np.where(raster.bits, 0, 255).astype(np.uint8)


def measure_to_gray(measure: MeasureRaster, mode: str = "gamma", gamma: float = 0.5,
                    step: Optional[float] = None) -> np.ndarray:
    """Grey levels for a measure: the gamma law, or a saturating brightness ramp.

    ``saturate`` adds ``step`` grey levels per unit of the smallest positive
    mass and clips at 255, like brightening a pixel by a fixed amount on
    every visit of a chaos-game orbit.
    """
    if mode == "gamma":
        return gamma_gray(measure, gamma)
    if mode != "saturate":
        fail(GeometryError, f"grey mode must be one of {GRAY_MODES}, got {mode!r}")
    mass = measure.mass
    positive = mass[mass > 0.0]
    if positive.size == 0:
        return np.zeros(mass.shape, dtype=np.uint8)
    increment = 16.0 if step is None else float(step)
    return np.clip(np.rint(mass / float(positive.min()) * increment), 0, 255).astype(np.uint8)


def write_pgm(gray: np.ndarray, path: str) -> str:
    if gray.dtype != np.uint8 or gray.ndim != 2:
        fail(GeometryError, f"PGM output needs a 2-D uint8 array, got {gray.dtype} {gray.shape}")
    Image.fromarray(gray).save(path, format="PPM")
    logger.debug(f"wrote {path}")
    return path


def write_ppm(rgb: np.ndarray, path: str) -> str:
    if rgb.dtype != np.uint8 or rgb.ndim != 3 or rgb.shape[2] != 3:
        fail(GeometryError, f"PPM output needs a (h, w, 3) uint8 array, got {rgb.dtype} {rgb.shape}")
    Image.fromarray(rgb).save(path, format="PPM")
    logger.debug(f"wrote {path}")
    return path


def write_raster(raster: Raster, path: str) -> str:
    return write_pgm(raster_to_gray(raster), path)


def read_gray(path: str) -> np.ndarray:
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("L"), dtype=np.uint8)
    except (FileNotFoundError, OSError) as exc:
        msg = f"cannot read image {path}: {exc}"
        logger.error(msg)
        raise ConfigError(msg) from exc


def read_raster(path: str, width: Optional[int] = None, height: Optional[int] = None,
                frame: Frame = UNIT_FRAME, threshold: int = 128) -> Raster:
    """Dark pixels (below threshold) of an image file, resized to width x height when given."""
    gray = read_gray(path)
    if width is not None and height is not None and gray.shape != (height, width):
        with Image.fromarray(gray) as img:
            gray = np.asarray(img.resize((width, height), Image.Resampling.NEAREST), dtype=np.uint8)
    return Raster(gray < threshold, frame)
