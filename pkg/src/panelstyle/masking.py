"""Channel decomposition of a panel into textbox / foreground / background.

The three masks always form an exact partition of the panel: overlaps are
resolved with the priority textbox > foreground > background (text
bubbles visually occlude scene content), and background is defined as
the complement of the other two.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .corpus import PanelRecord
from .errors import ContractViolation
from .geometry import rasterize_polygon, rasterize_rect

CHANNELS = ("textbox", "foreground", "background")
MASK_VARIANTS = ("rect", "fit")

# Neutral fill keeps masked-out areas from injecting strong edges into
# the transfer network.
DEFAULT_FILL = (128, 128, 128)


@dataclass
class MaskSet:
    panel_id: str
    variant: str
    textbox_mask: np.ndarray
    foreground_mask: np.ndarray
    background_mask: np.ndarray

    def mask(self, channel: str) -> np.ndarray:
        if channel not in CHANNELS:
            raise ContractViolation(f"unknown channel {channel!r}")
        return getattr(self, f"{channel}_mask")

    def channel_empty(self, channel: str) -> bool:
        return not bool(self.mask(channel).any())

    @property
    def shape(self) -> tuple[int, int]:
        return self.background_mask.shape


@dataclass
class MaskedImage:
    panel_id: str
    channel: str
    image: np.ndarray


def _rasterize_boxes(boxes, variant: str, height: int, width: int) -> np.ndarray:
    out = np.zeros((height, width), dtype=np.uint8)
    for box in boxes:
        if variant == "fit" and box.polygon is not None:
            rasterize_polygon(box.polygon, height, width, out=out)
        else:
            rasterize_rect(box.rect, height, width, out=out)
    return out


def build_mask_set(panel: PanelRecord, variant: str = "rect") -> MaskSet:
    """Rasterize a panel's annotations into three disjoint binary masks.

    The ``fit`` variant uses an annotation's polygon when one exists and
    falls back to its rectangle otherwise. A panel without annotations
    yields an all-ones background.
    """
    if variant not in MASK_VARIANTS:
        raise ContractViolation(f"unknown mask variant {variant!r}")
    height, width = panel.image.shape[:2]

    textbox = _rasterize_boxes(panel.textboxes, variant, height, width)
    scene = _rasterize_boxes([*panel.bodies, *panel.faces], variant, height, width)
    foreground = scene & (1 - textbox)
    background = 1 - (textbox | foreground)
    return MaskSet(
        panel_id=panel.panel_id,
        variant=variant,
        textbox_mask=textbox,
        foreground_mask=foreground,
        background_mask=background.astype(np.uint8),
    )


def apply_mask(panel_image: np.ndarray, mask: np.ndarray, fill=DEFAULT_FILL) -> np.ndarray:
    """Copy on-mask pixels, set off-mask pixels to ``fill``."""
    if panel_image.shape[:2] != mask.shape:
        raise ContractViolation(
            f"image {panel_image.shape[:2]} and mask {mask.shape} dimensions differ"
        )
    fill_px = np.asarray(fill, dtype=panel_image.dtype)
    if panel_image.ndim == 3:
        return np.where(mask[..., None].astype(bool), panel_image, fill_px)
    return np.where(mask.astype(bool), panel_image, fill_px)


def masked_channel(panel: PanelRecord, masks: MaskSet, channel: str, fill=DEFAULT_FILL) -> MaskedImage:
    return MaskedImage(
        panel_id=panel.panel_id,
        channel=channel,
        image=apply_mask(panel.image, masks.mask(channel), fill),
    )


def save_mask_set(masks: MaskSet, out_dir: Path | str) -> list[Path]:
    """Write the three masks as 1-bit PNGs named {panel_id}.{variant}.{channel}.png."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for channel in CHANNELS:
        path = out_dir / f"{masks.panel_id}.{masks.variant}.{channel}.png"
        Image.fromarray(masks.mask(channel).astype(bool)).save(path, bits=1)
        paths.append(path)
    return paths


def load_mask(path: Path | str) -> np.ndarray:
    with Image.open(path) as im:
        return (np.asarray(im.convert("L")) > 0).astype(np.uint8)
