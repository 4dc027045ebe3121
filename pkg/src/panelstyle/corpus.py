"""Page/panel ingestion with reading-order resolution.

Annotation input is one JSON document per title (see ``TITLE_SCHEMA``).
Annotation rectangles in the file are given in page pixels; after
ingestion every box stored on a ``PanelRecord`` is panel-local.

Reading order: manga pages are read right-to-left within a row, comics
left-to-right; rows run top-to-bottom in both. Two panels share a row
when their vertical overlap is at least half the shorter panel's height.
Explicit ``reading_index`` values in the annotation file always win, but
only when every panel on the page carries one.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import NotFoundError, SchemaError
from .geometry import Rect

logger = logging.getLogger(__name__)

SOURCES = ("comics", "manga")
ANNOTATION_KINDS = ("textbox", "body", "face")

# Fraction of the shorter panel height two panels must overlap vertically
# to count as the same row.
ROW_OVERLAP_FRACTION = 0.5

TITLE_SCHEMA = {
    "type": "object",
    "required": ["title", "pages"],
    "properties": {
        "title": {"type": "string"},
        "source": {"enum": list(SOURCES)},
        "pages": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["page_id", "image", "panels"],
                "properties": {
                    "page_id": {"type": "string"},
                    "image": {"type": "string"},
                    "panels": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "object",
                            "required": ["bbox"],
                            "properties": {
                                "bbox": {
                                    "type": "array",
                                    "minItems": 4,
                                    "maxItems": 4,
                                    "items": {"type": "number"},
                                },
                                "reading_index": {"type": "integer", "minimum": 0},
                                "textboxes": {"$ref": "#/$defs/boxes"},
                                "bodies": {"$ref": "#/$defs/boxes"},
                                "faces": {"$ref": "#/$defs/boxes"},
                            },
                        },
                    },
                },
            },
        },
    },
    "$defs": {
        "boxes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["rect"],
                "properties": {
                    "rect": {
                        "type": "array",
                        "minItems": 4,
                        "maxItems": 4,
                        "items": {"type": "number"},
                    },
                    "polygon": {
                        "type": "array",
                        "minItems": 3,
                        "items": {
                            "type": "array",
                            "minItems": 2,
                            "maxItems": 2,
                            "items": {"type": "number"},
                        },
                    },
                },
            },
        }
    },
}


@dataclass
class AnnotationBox:
    """One annotated region, in panel-local pixels."""

    kind: str
    rect: Rect
    polygon: list[tuple[float, float]] | None = None

    def __post_init__(self):
        if self.kind not in ANNOTATION_KINDS:
            raise ValueError(f"unknown annotation kind {self.kind!r}")
        if self.rect.area <= 0:
            raise ValueError(f"annotation rect has no area: {self.rect}")


@dataclass
class PanelRecord:
    panel_id: str
    bbox: Rect
    image: np.ndarray
    textboxes: list[AnnotationBox] = field(default_factory=list)
    bodies: list[AnnotationBox] = field(default_factory=list)
    faces: list[AnnotationBox] = field(default_factory=list)

    reading_index: int = 0

    @property
    def annotations(self) -> list[AnnotationBox]:
        return [*self.textboxes, *self.bodies, *self.faces]


@dataclass
class PageRecord:
    page_id: str
    source: str
    image: np.ndarray
    panels: list[PanelRecord]
    width_px: int
    height_px: int
    book_id: str = ""

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if not self.panels:
            raise ValueError(f"page {self.page_id} has no panels")
        for p in self.panels:
            if not p.bbox.inside(self.width_px, self.height_px):
                raise ValueError(
                    f"panel {p.panel_id} bbox {p.bbox} outside page "
                    f"{self.width_px}x{self.height_px}"
                )

    def panel(self, panel_id: str) -> PanelRecord:
        for p in self.panels:
            if p.panel_id == panel_id:
                return p
        raise NotFoundError(f"no panel {panel_id!r} on page {self.page_id}")


def load_image(path: Path | str) -> np.ndarray:
    """Read a PNG/JPEG as an RGB uint8 array."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def _validate_title_doc(doc, path: str):
    import jsonschema

    try:
        jsonschema.validate(doc, TITLE_SCHEMA)
    except jsonschema.ValidationError as e:
        where = "$" + "".join(
            f"[{p}]" if isinstance(p, int) else f".{p}" for p in e.absolute_path
        )
        raise SchemaError(e.message, path=path, where=where) from e


def _rect_center_distance(rect: Rect, px: float, py: float) -> float:
    dx = max(rect.x - px, 0.0, px - rect.x2)
    dy = max(rect.y - py, 0.0, py - rect.y2)
    return float(np.hypot(dx, dy))


def ingest_title(annotation_file: Path | str, image_dir: Path | str) -> list[PageRecord]:
    """Load one annotated title into ``PageRecord`` objects.

    Annotation boxes are pooled per page and attached to the panel whose
    bbox contains the box center; a box whose center falls in no panel
    goes to the nearest panel and is logged. Panels come back sorted in
    reading order for the title's source.
    """
    annotation_file = Path(annotation_file)
    image_dir = Path(image_dir)
    try:
        doc = json.loads(annotation_file.read_text())
    except json.JSONDecodeError as e:
        raise SchemaError(f"not valid JSON: {e}", path=str(annotation_file)) from e
    _validate_title_doc(doc, str(annotation_file))

    title = doc["title"]
    source = doc.get("source", "manga")
    pages = []
    for pi, page_doc in enumerate(doc["pages"]):
        image_path = image_dir / page_doc["image"]
        if not image_path.exists():
            raise SchemaError(
                f"image {page_doc['image']!r} not found under {image_dir}",
                path=str(annotation_file),
                where=f"$.pages[{pi}].image",
            )
        page_image = load_image(image_path)
        height, width = page_image.shape[:2]

        panels = []
        explicit_order = []
        for ki, panel_doc in enumerate(page_doc["panels"]):
            bbox = Rect.from_list(panel_doc["bbox"])
            if bbox.area <= 0:
                raise SchemaError(
                    f"panel bbox {bbox} has no area",
                    path=str(annotation_file),
                    where=f"$.pages[{pi}].panels[{ki}].bbox",
                )
            if not bbox.inside(width, height):
                raise SchemaError(
                    f"panel bbox {bbox} outside page {width}x{height}",
                    path=str(annotation_file),
                    where=f"$.pages[{pi}].panels[{ki}].bbox",
                )
            panel_id = f"{page_doc['page_id']}.p{ki}"
            panels.append(
                PanelRecord(
                    panel_id=panel_id,
                    bbox=bbox,
                    image=page_image[bbox.y : bbox.y2, bbox.x : bbox.x2],
                    reading_index=ki,
                )
            )
            explicit_order.append(panel_doc.get("reading_index"))

        # Pool annotations in page coordinates, then attach by box center.
        pooled = []
        for ki, panel_doc in enumerate(page_doc["panels"]):
            for list_key, kind in (("textboxes", "textbox"), ("bodies", "body"), ("faces", "face")):
                for box_doc in panel_doc.get(list_key, []):
                    rect = Rect.from_list(box_doc["rect"])
                    if rect.area <= 0:
                        raise SchemaError(
                            f"annotation rect {rect} has no area",
                            path=str(annotation_file),
                            where=f"$.pages[{pi}].panels[{ki}].{list_key}",
                        )
                    poly = box_doc.get("polygon")
                    if poly is not None:
                        poly = [(float(x), float(y)) for x, y in poly]
                    pooled.append((kind, rect, poly))

        for kind, rect, poly in pooled:
            cx, cy = rect.center
            target = None
            for p in panels:
                if p.bbox.contains_point(cx, cy):
                    target = p
                    break
            if target is None:
                target = min(panels, key=lambda p: _rect_center_distance(p.bbox, cx, cy))
                logger.warning(
                    "annotation center (%.1f, %.1f) on page %s falls in no panel; "
                    "attached to nearest panel %s",
                    cx, cy, page_doc["page_id"], target.panel_id,
                )
            local_rect = rect.translate(-target.bbox.x, -target.bbox.y)
            local_poly = (
                [(x - target.bbox.x, y - target.bbox.y) for x, y in poly] if poly else None
            )
            box = AnnotationBox(kind=kind, rect=local_rect, polygon=local_poly)
            if kind == "textbox":
                target.textboxes.append(box)
            elif kind == "body":
                target.bodies.append(box)
            else:
                target.faces.append(box)

        if all(idx is not None for idx in explicit_order):
            order = sorted(range(len(panels)), key=lambda k: explicit_order[k])
            panels = [replace(panels[k], reading_index=i) for i, k in enumerate(order)]
        else:
            if any(idx is not None for idx in explicit_order):
                logger.warning(
                    "page %s: partial reading_index annotation ignored; "
                    "deriving order geometrically",
                    page_doc["page_id"],
                )
            panels = resolve_reading_order(panels, source)

        pages.append(
            PageRecord(
                page_id=page_doc["page_id"],
                source=source,
                image=page_image,
                panels=panels,
                width_px=width,
                height_px=height,
                book_id=title,
            )
        )
    return pages


def _cluster_rows(panels: list[PanelRecord]) -> list[list[int]]:
    """Group panel indices into rows via pairwise vertical overlap."""
    n = len(panels)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            a, b = panels[i].bbox, panels[j].bbox
            overlap = min(a.y2, b.y2) - max(a.y, b.y)
            if overlap >= ROW_OVERLAP_FRACTION * min(a.h, b.h):
                parent[find(i)] = find(j)

    rows: dict[int, list[int]] = {}
    for i in range(n):
        rows.setdefault(find(i), []).append(i)
    return sorted(
        rows.values(),
        key=lambda idxs: (min(panels[i].bbox.y for i in idxs), min(panels[i].bbox.x for i in idxs)),
    )


def resolve_reading_order(panels: list[PanelRecord], source: str) -> list[PanelRecord]:
    """Return panels reordered into reading order, reindexed from 0.

    Stable: ties keep the incoming relative order, so applying the
    function twice yields the same list.
    """
    if source not in SOURCES:
        raise ValueError(f"unknown source {source!r}")
    if len(panels) <= 1:
        return [replace(p, reading_index=i) for i, p in enumerate(panels)]

    ordered: list[PanelRecord] = []
    for row in _cluster_rows(panels):
        xs = sorted(
            row,
            key=lambda i: panels[i].bbox.center[0],
            reverse=(source == "manga"),
        )
        ordered.extend(panels[i] for i in xs)
    return [replace(p, reading_index=i) for i, p in enumerate(ordered)]


def crop_panel(page: PageRecord, panel_id: str) -> np.ndarray:
    """Cut the panel's bbox out of the page image."""
    p = page.panel(panel_id)
    b = p.bbox
    return page.image[b.y : b.y2, b.x : b.x2].copy()


# --- persistence ---------------------------------------------------------

def _box_to_doc(box: AnnotationBox) -> dict:
    doc = {"rect": box.rect.to_list()}
    if box.polygon is not None:
        doc["polygon"] = [[float(x), float(y)] for x, y in box.polygon]
    return doc


def _box_from_doc(kind: str, doc: dict) -> AnnotationBox:
    poly = doc.get("polygon")
    if poly is not None:
        poly = [(float(x), float(y)) for x, y in poly]
    return AnnotationBox(kind=kind, rect=Rect.from_list(doc["rect"]), polygon=poly)


def save_corpus(pages: list[PageRecord], out_dir: Path | str, write_crops: bool = True) -> Path:
    """Persist ingested records as ``corpus.json`` plus panel crop PNGs.

    Crops land under ``crops/{page_id}/{panel_id}.png`` so downstream
    stages can swap the crop root to point at transferred panels.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc_pages = []
    for page in pages:
        page_path = out_dir / "pages" / f"{page.page_id}.png"
        page_path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(page.image).save(page_path)
        doc_panels = []
        for p in page.panels:
            if write_crops:
                crop_path = out_dir / "crops" / page.page_id / f"{p.panel_id}.png"
                crop_path.parent.mkdir(parents=True, exist_ok=True)
                Image.fromarray(p.image).save(crop_path)
            doc_panels.append(
                {
                    "panel_id": p.panel_id,
                    "bbox": p.bbox.to_list(),
                    "reading_index": p.reading_index,
                    "textboxes": [_box_to_doc(b) for b in p.textboxes],
                    "bodies": [_box_to_doc(b) for b in p.bodies],
                    "faces": [_box_to_doc(b) for b in p.faces],
                }
            )
        doc_pages.append(
            {
                "page_id": page.page_id,
                "source": page.source,
                "book_id": page.book_id,
                "image": f"pages/{page.page_id}.png",
                "width": page.width_px,
                "height": page.height_px,
                "panels": doc_panels,
            }
        )
    manifest = out_dir / "corpus.json"
    manifest.write_text(json.dumps({"pages": doc_pages}, indent=2, sort_keys=True))
    return manifest


def load_corpus(manifest: Path | str) -> list[PageRecord]:
    manifest = Path(manifest)
    root = manifest.parent
    doc = json.loads(manifest.read_text())
    pages = []
    for page_doc in doc["pages"]:
        image = load_image(root / page_doc["image"])
        panels = []
        for p_doc in sorted(page_doc["panels"], key=lambda d: d["reading_index"]):
            bbox = Rect.from_list(p_doc["bbox"])
            panels.append(
                PanelRecord(
                    panel_id=p_doc["panel_id"],
                    bbox=bbox,
                    image=image[bbox.y : bbox.y2, bbox.x : bbox.x2],
                    textboxes=[_box_from_doc("textbox", d) for d in p_doc["textboxes"]],
                    bodies=[_box_from_doc("body", d) for d in p_doc["bodies"]],
                    faces=[_box_from_doc("face", d) for d in p_doc["faces"]],
                    reading_index=p_doc["reading_index"],
                )
            )
        pages.append(
            PageRecord(
                page_id=page_doc["page_id"],
                source=page_doc["source"],
                image=image,
                panels=panels,
                width_px=page_doc["width"],
                height_px=page_doc["height"],
                book_id=page_doc.get("book_id", ""),
            )
        )
    return pages


def as_single_panel_page(page: PageRecord) -> PageRecord:
    """Whole-page baseline: wrap the page image as one full-bleed panel."""
    panel = PanelRecord(
        panel_id=f"{page.page_id}.whole",
        bbox=Rect(0, 0, page.width_px, page.height_px),
        image=page.image,
        reading_index=0,
    )
    return PageRecord(
        page_id=page.page_id,
        source=page.source,
        image=page.image,
        panels=[panel],
        width_px=page.width_px,
        height_px=page.height_px,
        book_id=page.book_id,
    )
