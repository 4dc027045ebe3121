"""
Recomposing panels into a page with layout templates
====================================================

A layout template is a page geometry: rows of slots in unit
coordinates, indexed by how many panels it holds. Panels are matched to
slots in reading order and contain-fit into them, preserving each
panel's aspect ratio. When no template matches a panel count, a uniform
grid is synthesized so recomposition never fails.
"""

import json
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from panelstyle import compose_page, load_template_library, pick_template

scratch = Path(tempfile.mkdtemp(prefix="panelstyle_demo_"))
print(f"working in {scratch}")

def slot(x, y, w, h):
    return {"x": x, "y": y, "w": w, "h": h}


# A tiny template library: one full-page splash, and a 2-over-1 page.
library = {
    "templates": [
        {
            "template_id": "splash",
            "source_style": "demo",
            "panel_count": 1,
            "rows": [[slot(0.03, 0.03, 0.94, 0.94)]],
        },
        {
            "template_id": "two-over-one",
            "source_style": "demo",
            "panel_count": 3,
            "rows": [
                [slot(0.03, 0.03, 0.45, 0.42), slot(0.52, 0.03, 0.45, 0.42)],
                [slot(0.03, 0.50, 0.94, 0.47)],
            ],
        },
    ],
}
path = scratch / "templates.json"
path.write_text(json.dumps(library))
templates = load_template_library(path)
print(f"loaded {len(templates)} templates")

rng = np.random.default_rng(5)
panels = [
    (f"p{i}", rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8))
    for i, (h, w) in enumerate([(90, 120), (80, 60), (50, 140)])
]

# Three panels: the 2-over-1 template matches directly.
template = pick_template(len(panels), templates, seed=0)
page = compose_page(panels, template, page_width_px=480, page_aspect=1.5)
print(f"3 panels -> template {page.template_id!r}")
for panel_id, rect in page.placements:
    print(f"  {panel_id}: x={rect.x} y={rect.y} {rect.w}x{rect.h}")
Image.fromarray(page.image).save(scratch / "three_panel_page.png")

# Five panels: nothing in the library holds five, so a grid is made up.
five = [(f"q{i}", rng.integers(0, 256, size=(60, 60, 3), dtype=np.uint8)) for i in range(5)]
template = pick_template(len(five), templates, seed=0)
page = compose_page(five, template, page_width_px=480, page_aspect=1.5)
print(f"5 panels -> synthesized template {page.template_id!r}")
Image.fromarray(page.image).save(scratch / "five_panel_page.png")

print(f"composed pages written under {scratch}")
