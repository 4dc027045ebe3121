"""Page recomposition: place transferred panels into a target-style layout.

Templates are authored JSON digitized from reference pages, keyed by
panel count. Slots are rectangles in unit page coordinates; the slot
list order inside a template is the reading order of the target style,
so composition is a straight zip of panels against slots.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ContractViolation, SchemaError
from .geometry import Rect

logger = logging.getLogger(__name__)

GUTTER_COLOR = (255, 255, 255)
DEFAULT_PAGE_ASPECT = 1.5  # height / width when a caller gives only width

# Margins used for synthesized rows/grids, in unit coordinates.
_PAD = 0.03
_GAP = 0.02


@dataclass(frozen=True)
class UnitRect:
    """Rectangle in page-fraction coordinates, all values in [0, 1]."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"slot must have positive size, got {self}")
        if not (0 <= self.x and 0 <= self.y and self.x + self.w <= 1 + 1e-9 and self.y + self.h <= 1 + 1e-9):
            raise ValueError(f"slot exceeds the unit page: {self}")

    def to_pixels(self, page_w: int, page_h: int) -> Rect:
        return Rect(
            x=round(self.x * page_w),
            y=round(self.y * page_h),
            w=max(1, round(self.w * page_w)),
            h=max(1, round(self.h * page_h)),
        )


@dataclass(frozen=True)
class LayoutTemplate:
    template_id: str
    source_style: str
    panel_count: int
    rows: tuple[tuple[UnitRect, ...], ...]

    def __post_init__(self):
        n = sum(len(row) for row in self.rows)
        if n != self.panel_count:
            raise SchemaError(
                f"template {self.template_id}: {n} slots but panel_count={self.panel_count}"
            )
        if self.panel_count <= 0:
            raise SchemaError(f"template {self.template_id}: panel_count must be positive")
        for row in self.rows:
            for a_i, a in enumerate(row):
                for b in row[a_i + 1 :]:
                    if _unit_overlap(a, b):
                        raise SchemaError(
                            f"template {self.template_id}: overlapping slots in a row"
                        )

    @property
    def slots(self) -> tuple[UnitRect, ...]:
        return tuple(slot for row in self.rows for slot in row)


def _unit_overlap(a: UnitRect, b: UnitRect) -> bool:
    return a.x < b.x + b.w and b.x < a.x + a.w and a.y < b.y + b.h and b.y < a.y + a.h


def template_from_dict(doc: dict) -> LayoutTemplate:
    try:
        rows = tuple(
            tuple(UnitRect(s["x"], s["y"], s["w"], s["h"]) for s in row)
            for row in doc["rows"]
        )
        return LayoutTemplate(
            template_id=doc["template_id"],
            source_style=doc["source_style"],
            panel_count=int(doc["panel_count"]),
            rows=rows,
        )
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"bad layout template: {e}") from e


def template_to_dict(t: LayoutTemplate) -> dict:
    return {
        "template_id": t.template_id,
        "source_style": t.source_style,
        "panel_count": t.panel_count,
        "rows": [
            [{"x": s.x, "y": s.y, "w": s.w, "h": s.h} for s in row] for row in t.rows
        ],
    }


def load_template_library(path: Path | str) -> list[LayoutTemplate]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
        entries = doc["templates"]
    except FileNotFoundError:
        raise
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise SchemaError(f"bad template library: {e}", path=str(path)) from e
    if not entries:
        raise SchemaError("template library is empty", path=str(path))
    return [template_from_dict(entry) for entry in entries]


def _uniform_row(count: int, y: float, h: float) -> tuple[UnitRect, ...]:
    usable = 1 - 2 * _PAD - (count - 1) * _GAP
    w = usable / count
    return tuple(
        UnitRect(x=_PAD + i * (w + _GAP), y=y, w=w, h=h) for i in range(count)
    )


def _uniform_grid(panel_count: int, template_id: str, source_style: str) -> LayoutTemplate:
    """Synthesized near-square grid used when the library has no usable base."""
    import math

    cols = math.ceil(math.sqrt(panel_count))
    n_rows = math.ceil(panel_count / cols)
    row_h = (1 - 2 * _PAD - (n_rows - 1) * _GAP) / n_rows
    rows = []
    remaining = panel_count
    for r in range(n_rows):
        k = min(cols, remaining)
        rows.append(_uniform_row(k, _PAD + r * (row_h + _GAP), row_h))
        remaining -= k
    return LayoutTemplate(
        template_id=template_id,
        source_style=source_style,
        panel_count=panel_count,
        rows=tuple(rows),
    )


def _extend_template(base: LayoutTemplate, extra: int) -> LayoutTemplate:
    """Append one uniform row holding ``extra`` slots below a base template.

    Existing slots are squeezed vertically to make room, preserving their
    relative geometry.
    """
    n_rows = len(base.rows)
    scale = n_rows / (n_rows + 1)
    squeezed = tuple(
        tuple(UnitRect(s.x, s.y * scale, s.w, s.h * scale) for s in row)
        for row in base.rows
    )
    band_top = scale + _GAP / 2
    new_row = _uniform_row(extra, band_top, 1 - band_top - _PAD / 2)
    return LayoutTemplate(
        template_id=f"{base.template_id}+{extra}",
        source_style=base.source_style,
        panel_count=base.panel_count + extra,
        rows=squeezed + (new_row,),
    )


def pick_template(
    panel_count: int, library: list[LayoutTemplate], seed: int = 0
) -> LayoutTemplate:
    """Seeded uniform choice among templates with the matching panel count.

    Without an exact match, the nearest smaller template is extended with
    an appended uniform row; with nothing smaller, a uniform grid is
    synthesized. Never fails on a non-empty library.
    """
    if not library:
        raise ContractViolation("template library is empty")
    if panel_count <= 0:
        raise ContractViolation(f"panel_count must be positive, got {panel_count}")
    rng = np.random.default_rng(seed)
    matching = sorted(
        (t for t in library if t.panel_count == panel_count),
        key=lambda t: t.template_id,
    )
    if matching:
        return matching[int(rng.integers(len(matching)))]
    below = [t for t in library if t.panel_count < panel_count]
    if below:
        best_count = max(t.panel_count for t in below)
        candidates = sorted(
            (t for t in below if t.panel_count == best_count),
            key=lambda t: t.template_id,
        )
        base = candidates[int(rng.integers(len(candidates)))]
        logger.info(
            "no %d-slot template; extending %s (%d slots) with %d appended",
            panel_count, base.template_id, base.panel_count, panel_count - best_count,
        )
        return _extend_template(base, panel_count - best_count)
    source = library[0].source_style
    logger.info("no template with <= %d slots; synthesizing a grid", panel_count)
    return _uniform_grid(panel_count, f"grid{panel_count}", source)


@dataclass
class ComposedPage:
    image: np.ndarray
    placements: list[tuple[str, Rect]] = field(default_factory=list)
    slot_rects: list[Rect] = field(default_factory=list)
    template_id: str = ""

    @property
    def height_px(self) -> int:
        return self.image.shape[0]

    @property
    def width_px(self) -> int:
        return self.image.shape[1]


def contain_fit(panel_w: int, panel_h: int, slot: Rect) -> Rect:
    """Scale a panel uniformly to fit inside a slot, then center it."""
    if panel_w <= 0 or panel_h <= 0:
        raise ContractViolation(f"panel has no pixels: {panel_w}x{panel_h}")
    scale = min(slot.w / panel_w, slot.h / panel_h)
    new_w = max(1, round(panel_w * scale))
    new_h = max(1, round(panel_h * scale))
    return Rect(
        x=slot.x + (slot.w - new_w) // 2,
        y=slot.y + (slot.h - new_h) // 2,
        w=new_w,
        h=new_h,
    )


def compose_page(
    panels: list[tuple[str, np.ndarray]],
    template: LayoutTemplate,
    page_width_px: int,
    page_aspect: float = DEFAULT_PAGE_ASPECT,
    gutter_color: tuple[int, int, int] = GUTTER_COLOR,
) -> ComposedPage:
    """Render ordered panels into the template's slots on a white page.

    Panels are matched to slots in order; each is contain-fit into its
    slot. Supplying fewer panels than slots leaves the tail slots blank;
    more panels than slots is a contract violation.
    """
    slots = template.slots
    if len(panels) > len(slots):
        raise ContractViolation(
            f"{len(panels)} panels but template {template.template_id} has "
            f"only {len(slots)} slots"
        )
    page_h = round(page_width_px * page_aspect)
    canvas = np.empty((page_h, page_width_px, 3), dtype=np.uint8)
    canvas[:] = np.array(gutter_color, dtype=np.uint8)

    placements: list[tuple[str, Rect]] = []
    slot_rects: list[Rect] = []
    for (panel_id, raster), slot in zip(panels, slots):
        slot_px = slot.to_pixels(page_width_px, page_h)
        ph, pw = raster.shape[:2]
        placed = contain_fit(pw, ph, slot_px)
        resized = np.asarray(
            Image.fromarray(raster).resize((placed.w, placed.h), Image.LANCZOS)
        )
        canvas[placed.y : placed.y + placed.h, placed.x : placed.x + placed.w] = resized
        placements.append((panel_id, placed))
        slot_rects.append(slot_px)

    return ComposedPage(
        image=canvas,
        placements=placements,
        slot_rects=slot_rects,
        template_id=template.template_id,
    )


def save_composed_page(page: ComposedPage, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(page.image).save(path)
    return path
