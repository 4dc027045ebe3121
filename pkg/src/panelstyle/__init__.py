"""Channel-wise style transfer for sequential art, with layout
recomposition and a visual-cloze coherence check.

The package splits a panel into textbox / foreground / background
channels, styles each channel with its own feedforward model chosen by
perceptual-hash similarity, blends the results, re-lays pages out in the
target style, and measures whether panel-sequence coherence survived.
"""

__version__ = "0.1.0"

from .cloze import (
    ClozeInstance,
    ClozeModel,
    ClozeTrainConfig,
    PanelEncoder,
    ReportRow,
    build_cloze_set,
    encode_panel,
    evaluate,
    score_candidates,
    train_cloze_model,
)
from .config import RunConfig, load_run_config, write_snapshot
from .corpus import (
    AnnotationBox,
    PageRecord,
    PanelRecord,
    crop_panel,
    ingest_title,
    load_corpus,
    resolve_reading_order,
    save_corpus,
)
from .geometry import Rect
from .layout import (
    ComposedPage,
    LayoutTemplate,
    compose_page,
    contain_fit,
    load_template_library,
    pick_template,
)
from .masking import MaskSet, MaskedImage, apply_mask, build_mask_set
from .style_select import (
    CompositionClass,
    ImageHash,
    StyleExemplar,
    average_hash,
    classify_composition,
    hamming,
    select_style,
)
from .stylenet.losses import LayerSelection, LossWeights, gram, perceptual_loss
from .stylenet.train import StyleModel, StyleTrainConfig, stylize, train_style_model
from .transfer import Treatment, blend, run_page, run_panel

__all__ = [
    "AnnotationBox",
    "PageRecord",
    "PanelRecord",
    "crop_panel",
    "ingest_title",
    "load_corpus",
    "resolve_reading_order",
    "save_corpus",
    "Rect",
    "MaskSet",
    "MaskedImage",
    "apply_mask",
    "build_mask_set",
    "CompositionClass",
    "ImageHash",
    "StyleExemplar",
    "average_hash",
    "classify_composition",
    "hamming",
    "select_style",
    "LossWeights",
    "LayerSelection",
    "gram",
    "perceptual_loss",
    "StyleModel",
    "StyleTrainConfig",
    "train_style_model",
    "stylize",
    "LayoutTemplate",
    "ComposedPage",
    "load_template_library",
    "pick_template",
    "compose_page",
    "contain_fit",
    "Treatment",
    "blend",
    "run_panel",
    "run_page",
    "ClozeInstance",
    "ClozeModel",
    "ClozeTrainConfig",
    "PanelEncoder",
    "ReportRow",
    "build_cloze_set",
    "encode_panel",
    "score_candidates",
    "train_cloze_model",
    "evaluate",
    "RunConfig",
    "load_run_config",
    "write_snapshot",
]
