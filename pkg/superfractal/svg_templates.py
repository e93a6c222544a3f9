import colorsys
from typing import List, Optional, Sequence, Tuple

import numpy as np

from superfractal.fractal_types import Frame


def address_colour(address: Sequence[int], M: int) -> str:
    """Hue from the address read as a base-M fraction."""
    frac = 0.0
    scale = 1.0
    for d in address:
        scale /= M
        frac += (d - 1) * scale
    r, g, b = colorsys.hsv_to_rgb(frac, 0.85, 0.85)
    return f"#{int(r * 255):02x}{int(g * 255):02x}{int(b * 255):02x}"


def _segments_svg(vertices: np.ndarray, colours: Optional[List[str]], to_px) -> str:
    if colours is None:
        pts = " ".join(f"{x:.3f},{y:.3f}" for x, y in (to_px(p) for p in vertices))
        return f'<polyline points="{pts}" fill="none" stroke="#1f3b73" stroke-width="1" />'
    parts = []
    for i, colour in enumerate(colours):
        (x1, y1), (x2, y2) = to_px(vertices[i]), to_px(vertices[i + 1])
        parts.append(f'<line x1="{x1:.3f}" y1="{y1:.3f}" x2="{x2:.3f}" y2="{y2:.3f}" '
                     f'stroke="{colour}" stroke-width="1" />')
    return "\n    ".join(parts)


def render_polyline_svg(
    vertices: np.ndarray,
    frame: Frame,
    width: int = 800,
    height: int = 800,
    title: str = "",
    colours: Optional[List[str]] = None,
    markers: Sequence[Tuple[float, float]] = (),
) -> str:
    xmin, ymin, xmax, ymax = frame
    margin = 10.0

    def to_px(p) -> Tuple[float, float]:
        x = margin + (p[0] - xmin) / (xmax - xmin) * (width - 2 * margin)
        y = margin + (ymax - p[1]) / (ymax - ymin) * (height - 2 * margin)
        return x, y

    body = _segments_svg(np.asarray(vertices, dtype=np.float64), colours, to_px)
    dots = "".join(
        f'<circle cx="{cx:.3f}" cy="{cy:.3f}" r="3" fill="#c0392b" />'
        for cx, cy in (to_px(m) for m in markers)
    )
    return f"""<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">
  <title>{title}</title>
  <rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff" />
  <g>
    {body}
  </g>
  <g>{dots}</g>
</svg>
"""
