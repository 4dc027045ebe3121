"""Style exemplar selection by structural similarity.

An 8x8 average hash fingerprints the masked content image; the exemplar
whose matching channel hash is closest in Hamming distance wins. An
optional composition filter first narrows candidates to exemplars whose
panel composition (shot class x object count) matches the content panel.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import PanelRecord, load_image
from .errors import ContractViolation, SchemaError
from .geometry import Rect
from .masking import CHANNELS, MaskSet, load_mask

logger = logging.getLogger(__name__)

HASH_SIDE = 8
HASH_BITS = HASH_SIDE * HASH_SIDE

SHOT_CLASSES = ("close", "medium")
COUNT_BUCKETS = ("one", "two", "many")

# A face/body box at least this fraction of the panel area makes the
# panel a close shot. Invented constant; override per run if needed.
CLOSE_SHOT_AREA_FRACTION = 0.40


@dataclass(frozen=True)
class ImageHash:
    bits: np.ndarray  # (64,) bool, row-major 8x8 cells

    def __post_init__(self):
        if self.bits.shape != (HASH_BITS,) or self.bits.dtype != np.bool_:
            raise ContractViolation("hash must be 64 bools")

    def to_hex(self) -> str:
        value = 0
        for b in self.bits:
            value = (value << 1) | int(b)
        return f"{value:016x}"

    @classmethod
    def from_hex(cls, text: str) -> "ImageHash":
        value = int(text, 16)
        bits = np.array([(value >> (HASH_BITS - 1 - i)) & 1 for i in range(HASH_BITS)], dtype=bool)
        return cls(bits=bits)

    def __eq__(self, other):
        return isinstance(other, ImageHash) and bool(np.array_equal(self.bits, other.bits))

    def __hash__(self):
        return hash(self.to_hex())


@dataclass(frozen=True)
class CompositionClass:
    shot: str
    object_count_bucket: str

    def __post_init__(self):
        if self.shot not in SHOT_CLASSES:
            raise ValueError(f"unknown shot class {self.shot!r}")
        if self.object_count_bucket not in COUNT_BUCKETS:
            raise ValueError(f"unknown count bucket {self.object_count_bucket!r}")


@dataclass
class StyleExemplar:
    exemplar_id: str
    book_id: str
    composition: CompositionClass
    image: np.ndarray
    mask_set: MaskSet | None = None
    hashes: dict[str, ImageHash] = field(default_factory=dict)

    def channel_hash(self, channel: str) -> ImageHash:
        if channel == "whole":
            if "whole" not in self.hashes:
                self.hashes["whole"] = average_hash(self.image)
            return self.hashes["whole"]
        try:
            return self.hashes[channel]
        except KeyError:
            raise ContractViolation(
                f"exemplar {self.exemplar_id} has no hash for channel {channel!r}"
            ) from None


def to_luma(image: np.ndarray) -> np.ndarray:
    """Integer ITU-R 601 luma, identical to PIL's RGB->L arithmetic."""
    if image.ndim == 2:
        return image.astype(np.uint8)
    rgb = image.astype(np.int64)
    return ((rgb[..., 0] * 299 + rgb[..., 1] * 587 + rgb[..., 2] * 114) // 1000).astype(np.uint8)


def _area_average(gray: np.ndarray, side: int) -> np.ndarray:
    """Exact area-weighted downsample of a 2-D array to side x side."""
    h, w = gray.shape
    if h % side == 0 and w % side == 0:
        return gray.reshape(side, h // side, side, w // side).astype(np.float64).mean(axis=(1, 3))
    # General case: per-cell weighted sums with fractional edge coverage.
    out = np.zeros((side, side), dtype=np.float64)
    g = gray.astype(np.float64)
    ys = np.linspace(0, h, side + 1)
    xs = np.linspace(0, w, side + 1)
    for i in range(side):
        y0, y1 = ys[i], ys[i + 1]
        rows = np.arange(int(np.floor(y0)), int(np.ceil(y1)))
        wy = np.minimum(rows + 1, y1) - np.maximum(rows, y0)
        for j in range(side):
            x0, x1 = xs[j], xs[j + 1]
            cols = np.arange(int(np.floor(x0)), int(np.ceil(x1)))
            wx = np.minimum(cols + 1, x1) - np.maximum(cols, x0)
            block = g[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1]
            out[i, j] = (wy[:, None] * wx[None, :] * block).sum() / ((y1 - y0) * (x1 - x0))
    return out


def average_hash(image: np.ndarray) -> ImageHash:
    """8x8 average hash: area-averaged luma thresholded at its own mean.

    Ties go to 1 (cell >= mean), so a uniform image hashes to all ones.
    """
    if image.size == 0:
        raise ContractViolation("cannot hash an empty image")
    cells = _area_average(to_luma(image), HASH_SIDE)
    mean = cells.sum() / HASH_BITS
    return ImageHash(bits=(cells >= mean).ravel())


def hamming(a: ImageHash, b: ImageHash) -> int:
    """Number of differing bits, 0..64."""
    return int(np.count_nonzero(a.bits != b.bits))


def classify_composition(panel: PanelRecord) -> CompositionClass:
    """Shot class from the largest face/body box, count bucket from bodies.

    A panel without any body boxes is treated as a scene shot:
    (medium, many).
    """
    h, w = panel.image.shape[:2]
    panel_area = h * w
    frame = Rect(0, 0, w, h)
    largest = 0
    for box in [*panel.bodies, *panel.faces]:
        largest = max(largest, box.rect.intersection(frame).area)
    shot = "close" if panel_area > 0 and largest >= CLOSE_SHOT_AREA_FRACTION * panel_area else "medium"
    n_bodies = len(panel.bodies)
    if n_bodies == 1:
        bucket = "one"
    elif n_bodies == 2:
        bucket = "two"
    else:  # 0 or >= 3
        bucket = "many"
    return CompositionClass(shot=shot, object_count_bucket=bucket)


def filter_by_composition(
    candidates: list[StyleExemplar], composition: CompositionClass
) -> list[StyleExemplar]:
    """Restrict to matching composition; fall back to all when none match."""
    matching = [c for c in candidates if c.composition == composition]
    return matching if matching else list(candidates)


def select_style(
    content_image: np.ndarray, candidates: list[StyleExemplar], channel: str
) -> tuple[StyleExemplar, int]:
    """Pick the candidate with minimal Hamming distance to the content hash.

    Ties break on the lexically smallest exemplar_id. Returns the winner
    and its distance.
    """
    if not candidates:
        raise ContractViolation("select_style needs at least one candidate")
    content_hash = average_hash(content_image)
    best = min(
        candidates,
        key=lambda c: (hamming(content_hash, c.channel_hash(channel)), c.exemplar_id),
    )
    return best, hamming(content_hash, best.channel_hash(channel))


# --- exemplar catalog ----------------------------------------------------

def save_catalog(exemplars: list[StyleExemplar], out_dir: Path | str) -> Path:
    """Write a catalog index plus exemplar images and masks."""
    from .masking import save_mask_set
    from PIL import Image

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for ex in exemplars:
        image_rel = f"images/{ex.exemplar_id}.png"
        (out_dir / "images").mkdir(exist_ok=True)
        Image.fromarray(ex.image).save(out_dir / image_rel)
        masks_rel = {}
        if ex.mask_set is not None:
            mask_dir = out_dir / "masks"
            for path in save_mask_set(ex.mask_set, mask_dir):
                channel = path.name.split(".")[-2]
                masks_rel[channel] = f"masks/{path.name}"
        entries.append(
            {
                "exemplar_id": ex.exemplar_id,
                "book_id": ex.book_id,
                "composition": {
                    "shot": ex.composition.shot,
                    "count": ex.composition.object_count_bucket,
                },
                "image": image_rel,
                "masks": masks_rel,
                "hashes": {ch: h.to_hex() for ch, h in ex.hashes.items()},
            }
        )
    index = out_dir / "catalog.json"
    index.write_text(json.dumps({"exemplars": entries}, indent=2, sort_keys=True))
    return index


def load_catalog(index_path: Path | str) -> list[StyleExemplar]:
    index_path = Path(index_path)
    root = index_path.parent
    try:
        doc = json.loads(index_path.read_text())
        entries = doc["exemplars"]
    except (json.JSONDecodeError, KeyError) as e:
        raise SchemaError(f"bad exemplar catalog: {e}", path=str(index_path)) from e
    exemplars = []
    for entry in entries:
        image = load_image(root / entry["image"])
        mask_set = None
        masks_rel = entry.get("masks") or {}
        if set(masks_rel) == set(CHANNELS):
            variant = Path(masks_rel["textbox"]).name.split(".")[-3]
            mask_set = MaskSet(
                panel_id=entry["exemplar_id"],
                variant=variant,
                textbox_mask=load_mask(root / masks_rel["textbox"]),
                foreground_mask=load_mask(root / masks_rel["foreground"]),
                background_mask=load_mask(root / masks_rel["background"]),
            )
        exemplars.append(
            StyleExemplar(
                exemplar_id=entry["exemplar_id"],
                book_id=entry["book_id"],
                composition=CompositionClass(
                    shot=entry["composition"]["shot"],
                    object_count_bucket=entry["composition"]["count"],
                ),
                image=image,
                mask_set=mask_set,
                hashes={ch: ImageHash.from_hex(hx) for ch, hx in entry.get("hashes", {}).items()},
            )
        )
    return exemplars


def build_exemplar(
    exemplar_id: str,
    book_id: str,
    panel: PanelRecord,
    variant: str = "rect",
    fill=None,
) -> StyleExemplar:
    """Assemble an exemplar from an annotated panel: masks, hashes, class."""
    from .masking import DEFAULT_FILL, apply_mask, build_mask_set

    fill = DEFAULT_FILL if fill is None else fill
    masks = build_mask_set(panel, variant)
    hashes = {
        ch: average_hash(apply_mask(panel.image, masks.mask(ch), fill)) for ch in CHANNELS
    }
    hashes["whole"] = average_hash(panel.image)
    return StyleExemplar(
        exemplar_id=exemplar_id,
        book_id=book_id,
        composition=classify_composition(panel),
        image=panel.image.copy(),
        mask_set=masks,
        hashes=hashes,
    )
