from .losses import (
    LayerSelection,
    LossWeights,
    feature_loss,
    gram,
    perceptual_loss,
    style_loss,
    total_variation,
)
from .networks import LossNetwork, TransformNet, load_loss_network
from .train import (
    ModelStore,
    StyleModel,
    StyleTrainConfig,
    load_style_model,
    save_style_model,
    stylize,
    train_style_model,
)

__all__ = [
    "LayerSelection",
    "LossWeights",
    "feature_loss",
    "gram",
    "perceptual_loss",
    "style_loss",
    "total_variation",
    "LossNetwork",
    "TransformNet",
    "load_loss_network",
    "ModelStore",
    "StyleModel",
    "StyleTrainConfig",
    "load_style_model",
    "save_style_model",
    "stylize",
    "train_style_model",
]
