"""Per-panel style transfer: mask, select styles, stylize channels, blend.

A Treatment names one experimental condition: where style exemplars come
from (standalone art images vs comic panels), which mask variant guides
channel decomposition (none, rectangles, or polygon fit), and whether
exemplar selection is restricted to the panel's composition class.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .corpus import PageRecord, PanelRecord
from .errors import ConfigError, ContractViolation, PanelStyleError
from .layout import ComposedPage, LayoutTemplate, compose_page, pick_template, save_composed_page
from .masking import CHANNELS, DEFAULT_FILL, MaskSet, apply_mask, build_mask_set
from .style_select import StyleExemplar, classify_composition, filter_by_composition, select_style
from .stylenet.train import ModelStore, StyleModel, stylize

logger = logging.getLogger(__name__)

STYLE_SOURCES = ("AS", "CP")
MASKINGS = ("N_M", "R_M", "F_M")
MASKING_VARIANT = {"R_M": "rect", "F_M": "fit"}

# Blend priority, painted first to last: later channels win contested pixels.
BLEND_ORDER = ("background", "foreground", "textbox")


@dataclass(frozen=True)
class Treatment:
    style_source: str
    masking: str
    composition_select: bool = False

    def __post_init__(self):
        if self.style_source not in STYLE_SOURCES:
            raise ConfigError(f"unknown style source {self.style_source!r}")
        if self.masking not in MASKINGS:
            raise ConfigError(f"unknown masking mode {self.masking!r}")
        if self.composition_select and self.masking == "N_M":
            raise ConfigError("composition_select requires masking other than N_M")

    @classmethod
    def parse(cls, text: str) -> "Treatment":
        """Parse flag syntax like ``CP,R_M`` or ``CP,F_M,C``."""
        tokens = [t.strip() for t in text.split(",") if t.strip()]
        if len(tokens) not in (2, 3):
            raise ConfigError(
                f"treatment must be 'SOURCE,MASKING[,C]', got {text!r}"
            )
        composition = False
        if len(tokens) == 3:
            if tokens[2] != "C":
                raise ConfigError(f"unknown treatment token {tokens[2]!r} in {text!r}")
            composition = True
        return cls(tokens[0], tokens[1], composition)

    @property
    def tag(self) -> str:
        """Canonical name, also the output directory component."""
        parts = [self.style_source, self.masking]
        if self.composition_select:
            parts.append("C")
        return ",".join(parts)

    @property
    def mask_variant(self) -> str | None:
        return MASKING_VARIANT.get(self.masking)

    @property
    def uses_channels(self) -> bool:
        return self.masking != "N_M"


# Evaluation settings (cloze comparison) -> the treatment that produced
# the evaluated images. N_T evaluates unmodified originals.
SETTING_TREATMENTS: dict[str, Treatment | None] = {
    "N_T": None,
    "T_W": Treatment("CP", "N_M"),
    "T_M": Treatment("CP", "R_M"),
    "T_C": Treatment("CP", "R_M", composition_select=True),
}
EVAL_SETTINGS = tuple(SETTING_TREATMENTS)


@dataclass
class TransferJob:
    panel: PanelRecord
    treatment: Treatment
    selected_styles: dict[str, StyleModel] = field(default_factory=dict)
    outputs: dict[str, np.ndarray] = field(default_factory=dict)
    blended: np.ndarray | None = None
    selection_trace: dict[str, dict] = field(default_factory=dict)
    mask_set: MaskSet | None = None
    cached: bool = False


def blend(
    channel_outputs: dict[str, np.ndarray],
    mask_set: MaskSet,
    feather_radius: float = 0,
) -> np.ndarray:
    """Composite channel rasters under textbox > foreground > background.

    Channels may be absent only where their mask is empty; every pixel
    must be covered by some provided channel. ``feather_radius`` > 0
    swaps the hard per-pixel select for Gaussian-softened mask edges.
    """
    provided = {ch: out for ch, out in channel_outputs.items() if out is not None}
    if not provided:
        raise ContractViolation("blend needs at least one channel output")
    for ch in provided:
        if ch not in CHANNELS:
            raise ContractViolation(f"unknown blend channel {ch!r}")
    h, w = mask_set.shape
    for ch, out in provided.items():
        if out.shape[:2] != (h, w):
            raise ContractViolation(
                f"channel {ch!r} raster {out.shape[:2]} does not match masks {(h, w)}"
            )
    coverage = np.zeros((h, w), dtype=bool)
    for ch in provided:
        coverage |= mask_set.mask(ch).astype(bool)
    if not coverage.all():
        missing = [ch for ch in CHANNELS if ch not in provided]
        raise ContractViolation(
            f"{int((~coverage).sum())} pixels covered only by absent channels {missing}"
        )

    if feather_radius > 0:
        return _blend_feathered(provided, mask_set, feather_radius)
    out = np.zeros((h, w, 3), dtype=np.uint8)
    for ch in BLEND_ORDER:
        if ch in provided:
            sel = mask_set.mask(ch).astype(bool)[..., None]
            out = np.where(sel, provided[ch], out)
    return out


def _blend_feathered(
    provided: dict[str, np.ndarray], mask_set: MaskSet, radius: float
) -> np.ndarray:
    from PIL import ImageFilter

    h, w = mask_set.shape
    acc = np.zeros((h, w, 3), dtype=np.float64)
    for ch in BLEND_ORDER:
        if ch not in provided:
            continue
        mask_img = Image.fromarray(mask_set.mask(ch) * 255, mode="L")
        alpha = np.asarray(mask_img.filter(ImageFilter.GaussianBlur(radius)), dtype=np.float64) / 255.0
        acc = provided[ch].astype(np.float64) * alpha[..., None] + acc * (1 - alpha[..., None])
    return np.clip(np.rint(acc), 0, 255).astype(np.uint8)


def run_panel(
    panel: PanelRecord,
    treatment: Treatment,
    catalog: list[StyleExemplar],
    store: ModelStore,
    *,
    fill: tuple[int, int, int] = DEFAULT_FILL,
    feather_radius: float = 0,
) -> TransferJob:
    """Transfer one panel under one treatment.

    With masking, each non-empty channel is masked, matched against the
    catalog by average hash, stylized with that exemplar's channel model,
    and the channel outputs are blended. Comic-panel sources select and
    stylize per channel; art-style sources have no channel structure, so
    selection and models always use the whole image.
    """
    if not catalog:
        raise ContractViolation("exemplar catalog is empty")
    job = TransferJob(panel=panel, treatment=treatment)
    candidates = catalog
    if treatment.composition_select:
        composition = classify_composition(panel)
        candidates = filter_by_composition(catalog, composition)
        job.selection_trace["composition"] = {
            "shot": composition.shot,
            "object_count_bucket": composition.object_count_bucket,
            "candidates": len(candidates),
        }

    per_channel = treatment.style_source == "CP"

    if not treatment.uses_channels:
        exemplar, distance = select_style(panel.image, candidates, "whole")
        model = store.load(exemplar.exemplar_id, "whole")
        out = stylize(model, panel.image)
        job.selected_styles["whole"] = model
        job.outputs["whole"] = out
        job.blended = out
        job.selection_trace["whole"] = {
            "exemplar_id": exemplar.exemplar_id,
            "distance": distance,
            "model_channel": "whole",
        }
        return job

    masks = build_mask_set(panel, treatment.mask_variant)
    job.mask_set = masks
    for channel in CHANNELS:
        if masks.channel_empty(channel):
            job.selection_trace[channel] = {"skipped": "empty mask"}
            logger.debug("panel %s: channel %s empty, skipped", panel.panel_id, channel)
            continue
        content = apply_mask(panel.image, masks.mask(channel), fill)
        hash_channel = channel if per_channel else "whole"
        exemplar, distance = select_style(content, candidates, hash_channel)
        model_channel = channel if per_channel else "whole"
        model = store.load(exemplar.exemplar_id, model_channel)
        job.selected_styles[channel] = model
        job.outputs[channel] = stylize(model, content)
        job.selection_trace[channel] = {
            "exemplar_id": exemplar.exemplar_id,
            "distance": distance,
            "model_channel": model_channel,
        }
    job.blended = blend(job.outputs, masks, feather_radius)
    return job


@dataclass
class PageResult:
    page: PageRecord
    treatment: Treatment
    jobs: list[TransferJob]
    composed: ComposedPage | None = None
    template: LayoutTemplate | None = None
    timings: dict[str, float] = field(default_factory=dict)


def run_page(
    page: PageRecord,
    treatment: Treatment,
    catalog: list[StyleExemplar],
    store: ModelStore,
    template_library: list[LayoutTemplate] | None = None,
    *,
    page_width_px: int = 800,
    page_aspect: float | None = None,
    layout_seed: int = 0,
    fill: tuple[int, int, int] = DEFAULT_FILL,
    feather_radius: float = 0,
    existing: dict[str, np.ndarray] | None = None,
) -> PageResult:
    """Transfer every panel of a page in reading order, then recompose.

    ``existing`` maps panel_id to an already-transferred raster; those
    panels are reused untouched (restart support). Any panel failure
    aborts the page with the panel named; nothing partial is returned.
    """
    existing = existing or {}
    result = PageResult(page=page, treatment=treatment, jobs=[])
    ordered = sorted(page.panels, key=lambda p: p.reading_index)
    for panel in ordered:
        start = time.perf_counter()
        if panel.panel_id in existing:
            job = TransferJob(
                panel=panel,
                treatment=treatment,
                blended=existing[panel.panel_id],
                cached=True,
            )
            job.selection_trace["cached"] = True
        else:
            try:
                job = run_panel(
                    panel, treatment, catalog, store,
                    fill=fill, feather_radius=feather_radius,
                )
            except PanelStyleError as e:
                raise type(e)(f"panel {panel.panel_id}: {e}") from e
        result.timings[panel.panel_id] = time.perf_counter() - start
        result.jobs.append(job)

    if template_library is not None:
        template = pick_template(len(result.jobs), template_library, seed=layout_seed)
        kwargs = {} if page_aspect is None else {"page_aspect": page_aspect}
        result.template = template
        result.composed = compose_page(
            [(job.panel.panel_id, job.blended) for job in result.jobs],
            template,
            page_width_px,
            **kwargs,
        )
    return result


# --- output tree ---------------------------------------------------------

def page_output_dir(out_root: Path | str, treatment: Treatment, page_id: str) -> Path:
    return Path(out_root) / treatment.tag / page_id


def panel_output_path(
    out_root: Path | str, treatment: Treatment, page_id: str, panel_id: str
) -> Path:
    return page_output_dir(out_root, treatment, page_id) / f"{panel_id}.png"


def write_page_outputs(result: PageResult, out_root: Path | str) -> Path:
    """Write per-panel PNGs, the composed page, and trace.json."""
    out_dir = page_output_dir(out_root, result.treatment, result.page.page_id)
    out_dir.mkdir(parents=True, exist_ok=True)
    for job in result.jobs:
        Image.fromarray(job.blended).save(out_dir / f"{job.panel.panel_id}.png")
    if result.composed is not None:
        save_composed_page(result.composed, out_dir / "composed.png")

    trace = {
        "page_id": result.page.page_id,
        "treatment": result.treatment.tag,
        "panels": [
            {
                "panel_id": job.panel.panel_id,
                "selection": job.selection_trace,
                "cached": job.cached,
            }
            for job in result.jobs
        ],
        "template_id": result.template.template_id if result.template else None,
        "timings": {k: round(v, 6) for k, v in result.timings.items()},
    }
    (out_dir / "trace.json").write_text(json.dumps(trace, indent=2, sort_keys=True))
    return out_dir
