"""Synthetic fixture builders shared by the test suite.

Everything is drawn procedurally with numpy so the suite carries no
binary assets; a seed pins every fixture bit-for-bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from panelstyle.corpus import PageRecord, PanelRecord, ingest_title
from panelstyle.geometry import Rect
from panelstyle.style_select import build_exemplar


def fill_rect(img: np.ndarray, rect: Rect, color) -> None:
    img[max(0, rect.y) : rect.y2, max(0, rect.x) : rect.x2] = color


def gradient(h: int, w: int, c0, c1) -> np.ndarray:
    """Left-to-right linear blend between two RGB colors."""
    t = np.linspace(0.0, 1.0, w)[None, :, None]
    c0 = np.asarray(c0, dtype=np.float64)[None, None, :]
    c1 = np.asarray(c1, dtype=np.float64)[None, None, :]
    row = c0 + (c1 - c0) * t
    return np.broadcast_to(row, (h, w, 3)).astype(np.uint8)


def checker(h: int, w: int, cell: int = 4) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    return ((yy // cell + xx // cell) % 2).astype(np.uint8)


def random_rgb(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    return rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)


def draw_panel_content(img: np.ndarray, bbox: Rect, rng: np.random.Generator) -> dict:
    """Paint scene/figure/textbox content into one panel of a page image.

    Returns the page-coordinate annotation dict for the panel.
    """
    bg0 = rng.integers(40, 200, size=3)
    bg1 = rng.integers(40, 200, size=3)
    img[bbox.y : bbox.y2, bbox.x : bbox.x2] = gradient(bbox.h, bbox.w, bg0, bg1)

    # Body: solid block in the lower middle with a triangle "hat" that the
    # fit-mask polygon traces.
    bw = max(6, bbox.w // 3)
    bh = max(6, bbox.h // 2)
    bx = bbox.x + (bbox.w - bw) // 2
    by = bbox.y2 - bh - 2
    body_rect = Rect(bx, by, bw, bh)
    fill_rect(img, body_rect, rng.integers(0, 255, size=3))
    body_poly = [
        (bx + 0.5, by + bh - 0.5),
        (bx + bw / 2.0, by + 0.5),
        (bx + bw - 0.5, by + bh - 0.5),
    ]

    # Face: small square near the body top.
    fw = max(3, bw // 3)
    face_rect = Rect(bx + (bw - fw) // 2, by + 1, fw, max(3, bh // 4))
    fill_rect(img, face_rect, (240, 210, 180))

    # Textbox: white bubble with dark speckle in the panel's top-left.
    tw = max(8, bbox.w // 3)
    th = max(6, bbox.h // 4)
    tb_rect = Rect(bbox.x + 2, bbox.y + 2, tw, th)
    fill_rect(img, tb_rect, (255, 255, 255))
    speck = rng.random((th, tw)) < 0.2
    region = img[tb_rect.y : tb_rect.y2, tb_rect.x : tb_rect.x2]
    region[speck] = (20, 20, 20)

    return {
        "bbox": bbox.to_list(),
        "textboxes": [{"rect": tb_rect.to_list()}],
        "bodies": [
            {
                "rect": body_rect.to_list(),
                "polygon": [[float(x), float(y)] for x, y in body_poly],
            }
        ],
        "faces": [{"rect": face_rect.to_list()}],
    }


def grid_bboxes(width: int, height: int, rows: int, cols: int, margin: int = 6, gutter: int = 8):
    """Page-filling grid of panel bboxes."""
    cell_w = (width - 2 * margin - (cols - 1) * gutter) // cols
    cell_h = (height - 2 * margin - (rows - 1) * gutter) // rows
    out = []
    for r in range(rows):
        for c in range(cols):
            out.append(
                Rect(margin + c * (cell_w + gutter), margin + r * (cell_h + gutter), cell_w, cell_h)
            )
    return out


def write_title(
    out_dir: Path,
    title: str = "fixture",
    source: str = "manga",
    n_pages: int = 1,
    rows: int = 2,
    cols: int = 2,
    page_size: tuple[int, int] = (256, 320),
    seed: int = 0,
) -> tuple[Path, Path]:
    """Write a synthetic annotated title; returns (annotation_path, image_dir)."""
    out_dir = Path(out_dir)
    img_dir = out_dir / "images"
    img_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    width, height = page_size
    pages = []
    for pi in range(n_pages):
        img = np.full((height, width, 3), 255, dtype=np.uint8)
        panels = []
        for bbox in grid_bboxes(width, height, rows, cols):
            panels.append(draw_panel_content(img, bbox, rng))
        page_id = f"{title}_pg{pi:03d}"
        Image.fromarray(img).save(img_dir / f"{page_id}.png")
        pages.append({"page_id": page_id, "image": f"{page_id}.png", "panels": panels})
    doc = {"title": title, "source": source, "pages": pages}
    ann_path = out_dir / f"{title}.json"
    ann_path.write_text(json.dumps(doc, indent=2))
    return ann_path, img_dir


def ingest_fixture_title(tmp_path: Path, **kwargs) -> list[PageRecord]:
    ann, imgs = write_title(tmp_path, **kwargs)
    return ingest_title(ann, imgs)


def make_panel(
    panel_id: str = "p0",
    size: tuple[int, int] = (100, 100),
    image: np.ndarray | None = None,
    textboxes=(),
    bodies=(),
    faces=(),
    reading_index: int = 0,
) -> PanelRecord:
    """Assemble a standalone PanelRecord without a parent page."""
    from panelstyle.corpus import AnnotationBox

    w, h = size
    if image is None:
        image = np.zeros((h, w, 3), dtype=np.uint8)

    def boxes(kind, rects):
        out = []
        for r in rects:
            if isinstance(r, tuple) and len(r) == 2:
                rect, poly = r
            else:
                rect, poly = r, None
            out.append(AnnotationBox(kind=kind, rect=Rect.from_list(rect), polygon=poly))
        return out

    return PanelRecord(
        panel_id=panel_id,
        bbox=Rect(0, 0, w, h),
        image=image,
        textboxes=boxes("textbox", textboxes),
        bodies=boxes("body", bodies),
        faces=boxes("face", faces),
        reading_index=reading_index,
    )


def exemplar_catalog_from_pages(pages: list[PageRecord], book_id: str = "styles"):
    """Turn every panel of the given pages into a style exemplar."""
    exemplars = []
    for page in pages:
        for panel in page.panels:
            exemplars.append(
                build_exemplar(
                    exemplar_id=f"ex_{panel.panel_id}",
                    book_id=book_id,
                    panel=panel,
                )
            )
    return exemplars


def texture_image(seed: int = 3, size: int = 96) -> np.ndarray:
    """Blocky high-contrast texture standing in for an art-style exemplar."""
    rng = np.random.default_rng(seed)
    base = rng.integers(0, 256, size=(size // 8, size // 8, 3), dtype=np.uint8)
    return np.kron(base, np.ones((8, 8, 1), dtype=np.uint8))


def template_library_doc() -> dict:
    """Small layout template library covering 1, 3, 4, and 6 slots."""
    return {
        "templates": [
            {
                "template_id": "full_page",
                "source_style": "comics",
                "panel_count": 1,
                "rows": [[{"x": 0.05, "y": 0.05, "w": 0.9, "h": 0.9}]],
            },
            {
                "template_id": "strip3",
                "source_style": "comics",
                "panel_count": 3,
                "rows": [
                    [{"x": 0.05, "y": 0.05, "w": 0.9, "h": 0.26}],
                    [{"x": 0.05, "y": 0.37, "w": 0.9, "h": 0.26}],
                    [{"x": 0.05, "y": 0.69, "w": 0.9, "h": 0.26}],
                ],
            },
            {
                "template_id": "grid4",
                "source_style": "comics",
                "panel_count": 4,
                "rows": [
                    [
                        {"x": 0.05, "y": 0.05, "w": 0.42, "h": 0.42},
                        {"x": 0.53, "y": 0.05, "w": 0.42, "h": 0.42},
                    ],
                    [
                        {"x": 0.05, "y": 0.53, "w": 0.42, "h": 0.42},
                        {"x": 0.53, "y": 0.53, "w": 0.42, "h": 0.42},
                    ],
                ],
            },
            {
                "template_id": "grid4_tall",
                "source_style": "comics",
                "panel_count": 4,
                "rows": [
                    [{"x": 0.05, "y": 0.04, "w": 0.9, "h": 0.2}],
                    [
                        {"x": 0.05, "y": 0.28, "w": 0.42, "h": 0.44},
                        {"x": 0.53, "y": 0.28, "w": 0.42, "h": 0.44},
                    ],
                    [{"x": 0.05, "y": 0.76, "w": 0.9, "h": 0.2}],
                ],
            },
            {
                "template_id": "grid6",
                "source_style": "comics",
                "panel_count": 6,
                "rows": [
                    [
                        {"x": 0.05, "y": 0.04, "w": 0.42, "h": 0.28},
                        {"x": 0.53, "y": 0.04, "w": 0.42, "h": 0.28},
                    ],
                    [
                        {"x": 0.05, "y": 0.36, "w": 0.42, "h": 0.28},
                        {"x": 0.53, "y": 0.36, "w": 0.42, "h": 0.28},
                    ],
                    [
                        {"x": 0.05, "y": 0.68, "w": 0.42, "h": 0.28},
                        {"x": 0.53, "y": 0.68, "w": 0.42, "h": 0.28},
                    ],
                ],
            },
        ]
    }


def write_template_library(out_dir: Path) -> Path:
    path = Path(out_dir) / "templates.json"
    path.write_text(json.dumps(template_library_doc(), indent=2))
    return path


# --- moving-square corpus for the cloze task -----------------------------

def page_tint(page_index: int) -> tuple[int, int, int]:
    """Deterministic background color distinguishing pages from each other."""
    return (
        20 + (37 * page_index) % 200,
        20 + (61 * page_index) % 200,
        20 + (13 * page_index) % 200,
    )


def moving_square_panel(
    position: int,
    n_positions: int,
    size: int = 48,
    noise_seed: int | None = None,
    background: tuple[int, int, int] = (0, 0, 0),
) -> np.ndarray:
    """Tinted canvas with a white square whose x encodes the position index."""
    img = np.empty((size, size, 3), dtype=np.uint8)
    img[:] = np.array(background, dtype=np.uint8)
    sq = size // 6
    cx = int((position + 0.5) / n_positions * (size - sq))
    cy = (size - sq) // 2
    img[cy : cy + sq, cx : cx + sq] = 255
    if noise_seed is not None:
        rng = np.random.default_rng(noise_seed)
        noise = rng.integers(0, 25, size=img.shape, dtype=np.uint8)
        img = np.clip(img.astype(np.int16) + noise, 0, 255).astype(np.uint8)
    return img


def write_moving_square_title(
    out_dir: Path,
    title: str = "squares",
    n_pages: int = 60,
    panels_per_page: int = 8,
    panel_size: int = 48,
    source: str = "manga",
    seed: int = 0,
) -> tuple[Path, Path]:
    """Pages of left-to-right square progression, one row per page.

    The square advances one step per panel; each page carries its own
    background tint (plus pixel noise), so the true continuation matches
    the context in both progression and palette, while distractors drawn
    from distant pages do not.
    """
    out_dir = Path(out_dir)
    img_dir = out_dir / "images"
    img_dir.mkdir(parents=True, exist_ok=True)
    gutter = 4
    width = panels_per_page * (panel_size + gutter) + gutter
    height = panel_size + 2 * gutter
    pages = []
    for pi in range(n_pages):
        img = np.full((height, width, 3), 30, dtype=np.uint8)
        panels = []
        for k in range(panels_per_page):
            x = gutter + k * (panel_size + gutter)
            bbox = Rect(x, gutter, panel_size, panel_size)
            tile = moving_square_panel(
                k,
                panels_per_page,
                panel_size,
                noise_seed=seed * 100003 + pi * 101 + k,
                background=page_tint(pi),
            )
            img[bbox.y : bbox.y2, bbox.x : bbox.x2] = tile
            # Reading order is the progression order regardless of source.
            panels.append({"bbox": bbox.to_list(), "reading_index": k})
        page_id = f"{title}_pg{pi:03d}"
        Image.fromarray(img).save(img_dir / f"{page_id}.png")
        pages.append({"page_id": page_id, "image": f"{page_id}.png", "panels": panels})
    doc = {"title": title, "source": source, "pages": pages}
    ann_path = out_dir / f"{title}.json"
    ann_path.write_text(json.dumps(doc))
    return ann_path, img_dir
