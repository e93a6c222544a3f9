"""Superfractal: IFS attractors, V-variable fractals and their dimensions."""

__all__ = [
    "geometry",
    "ifs",
    "trees",
    "superifs",
    "dimension",
    "apps",
    "imaging",
    "config",
    "reporting",
    "utils",
    "errors",
]

__version__ = "0.1.0"
