"""
Ingesting annotated pages and recovering reading order
======================================================

Builds a tiny annotated title on disk, ingests it, and shows how panel
order depends on the declared source: manga pages read right-to-left,
comics pages left-to-right, top-to-bottom in both cases.
"""

import json
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from panelstyle import ingest_title

scratch = Path(tempfile.mkdtemp(prefix="panelstyle_demo_"))
print(f"working in {scratch}")

# One 2x2 page. The four panels are written into the annotation in
# arbitrary order; reading order is derived from geometry alone.
width, height = 200, 200
page = np.full((height, width, 3), 255, dtype=np.uint8)
boxes = {
    "top-left": [10, 10, 80, 80],
    "top-right": [110, 10, 80, 80],
    "bottom-left": [10, 110, 80, 80],
    "bottom-right": [110, 110, 80, 80],
}
for i, (x, y, w, h) in enumerate(boxes.values()):
    page[y : y + h, x : x + w] = 60 + 40 * i

(scratch / "images").mkdir()
Image.fromarray(page).save(scratch / "images" / "demo_pg000.png")

for source in ("manga", "comics"):
    doc = {
        "title": "demo",
        "source": source,
        "pages": [
            {
                "page_id": "demo_pg000",
                "image": "demo_pg000.png",
                "panels": [{"bbox": list(b)} for b in boxes.values()],
            }
        ],
    }
    ann = scratch / f"demo_{source}.json"
    ann.write_text(json.dumps(doc))

    pages = ingest_title(ann, scratch / "images")
    ordered = sorted(pages[0].panels, key=lambda p: p.reading_index)
    names = []
    for panel in ordered:
        for name, (x, y, w, h) in boxes.items():
            if (panel.bbox.x, panel.bbox.y) == (x, y):
                names.append(name)
    print(f"{source:7s} order: {' -> '.join(names)}")

# manga  order: top-right -> top-left -> bottom-right -> bottom-left
# comics order: top-left -> top-right -> bottom-left -> bottom-right
