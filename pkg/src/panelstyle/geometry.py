"""Rectangles and polygon rasterization on integer pixel grids.

Conventions used everywhere in the package:

* A ``Rect`` is (x, y, w, h) in pixels; it covers the half-open pixel
  ranges ``x .. x+w`` and ``y .. y+h``.
* Rasterization targets are (H, W) uint8 arrays holding {0, 1}.
* Polygon membership is decided at pixel centers (x+0.5, y+0.5) with the
  even-odd rule, so a polygon and its rasterization agree with any other
  center-based fill.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Rect:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 0 or self.h < 0:
            raise ValueError(f"negative rect size: {self}")

    @property
    def area(self) -> int:
        return self.w * self.h

    @property
    def x2(self) -> int:
        return self.x + self.w

    @property
    def y2(self) -> int:
        return self.y + self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def contains_point(self, px: float, py: float) -> bool:
        return self.x <= px < self.x2 and self.y <= py < self.y2

    def intersects(self, other: "Rect") -> bool:
        return not (
            self.x2 <= other.x
            or other.x2 <= self.x
            or self.y2 <= other.y
            or other.y2 <= self.y
        )

    def intersection(self, other: "Rect") -> "Rect":
        x = max(self.x, other.x)
        y = max(self.y, other.y)
        x2 = min(self.x2, other.x2)
        y2 = min(self.y2, other.y2)
        return Rect(x, y, max(0, x2 - x), max(0, y2 - y))

    def translate(self, dx: int, dy: int) -> "Rect":
        return Rect(self.x + dx, self.y + dy, self.w, self.h)

    def inside(self, width: int, height: int) -> bool:
        return self.x >= 0 and self.y >= 0 and self.x2 <= width and self.y2 <= height

    def to_list(self) -> list[int]:
        return [self.x, self.y, self.w, self.h]

    @classmethod
    def from_list(cls, values) -> "Rect":
        if len(values) != 4:
            raise ValueError(f"rect needs 4 values, got {values!r}")
        return cls(*(int(v) for v in values))


def rasterize_rect(rect: Rect, height: int, width: int, out: np.ndarray | None = None) -> np.ndarray:
    """Set to 1 every pixel covered by ``rect``, clipped to the canvas."""
    if out is None:
        out = np.zeros((height, width), dtype=np.uint8)
    x0 = max(0, rect.x)
    y0 = max(0, rect.y)
    x1 = min(width, rect.x2)
    y1 = min(height, rect.y2)
    if x1 > x0 and y1 > y0:
        out[y0:y1, x0:x1] = 1
    return out


def rasterize_polygon(points, height: int, width: int, out: np.ndarray | None = None) -> np.ndarray:
    """Scanline fill of a simple polygon given as [(x, y), ...] vertices.

    A pixel is filled when its center lies inside the polygon under the
    even-odd rule. Vertices may be floats. Degenerate polygons (< 3
    points) rasterize to nothing.
    """
    if out is None:
        out = np.zeros((height, width), dtype=np.uint8)
    pts = [(float(px), float(py)) for px, py in points]
    if len(pts) < 3:
        return out

    ys = [p[1] for p in pts]
    row0 = max(0, int(np.floor(min(ys) - 0.5)))
    row1 = min(height - 1, int(np.ceil(max(ys))))
    n = len(pts)
    for row in range(row0, row1 + 1):
        cy = row + 0.5
        crossings = []
        for i in range(n):
            x1, y1 = pts[i]
            x2, y2 = pts[(i + 1) % n]
            # Half-open edge test avoids double-counting shared vertices.
            if (y1 <= cy < y2) or (y2 <= cy < y1):
                t = (cy - y1) / (y2 - y1)
                crossings.append(x1 + t * (x2 - x1))
        crossings.sort()
        for j in range(0, len(crossings) - 1, 2):
            # Fill pixels whose center x lies in [crossings[j], crossings[j+1]).
            c0 = int(np.ceil(crossings[j] - 0.5))
            c1 = int(np.ceil(crossings[j + 1] - 0.5))
            c0 = max(0, c0)
            c1 = min(width, c1)
            if c1 > c0:
                out[row, c0:c1] = 1
    return out
