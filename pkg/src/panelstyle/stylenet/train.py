"""Training and application of feedforward style models.

One ``StyleModel`` binds a trained transformation network to a single
(style exemplar, channel) pair. Training is a plain Adam loop over the
content corpus in its given order, so a (seed, corpus) pair fully
determines the resulting weights.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..errors import AssetMissingError, ContractViolation, TrainingDivergence
from .losses import LayerSelection, LossWeights, check_layers_known, gram, perceptual_loss
from .networks import DEFAULT_LOSS_NETWORK_SEED, LossNetwork, TransformNet, load_loss_network

logger = logging.getLogger(__name__)

MODEL_CHANNELS = ("textbox", "foreground", "background", "whole")


@dataclass(frozen=True)
class StyleTrainConfig:
    seed: int = 0
    iterations: int = 500
    learning_rate: float = 1e-3
    image_size: int = 64
    weights: LossWeights = field(default_factory=LossWeights)
    layers: LayerSelection = field(default_factory=LayerSelection)
    residual_blocks: int = 5
    base_channels: int = 32
    loss_network_seed: int = DEFAULT_LOSS_NETWORK_SEED
    loss_network_weights: str | None = None
    log_every: int = 100

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weights"] = asdict(self.weights)
        d["layers"] = {
            "content_layers": list(self.layers.content_layers),
            "style_layers": list(self.layers.style_layers),
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StyleTrainConfig":
        d = dict(d)
        if "weights" in d:
            d["weights"] = LossWeights(**d["weights"])
        if "layers" in d:
            d["layers"] = LayerSelection(
                content_layers=tuple(d["layers"]["content_layers"]),
                style_layers=tuple(d["layers"]["style_layers"]),
            )
        return cls(**d)


@dataclass
class StyleModel:
    model_id: str
    channel: str
    style_exemplar_id: str
    state_dict: dict
    config: StyleTrainConfig
    loss_curve: list[dict] = field(default_factory=list)
    loss_network_from: str | None = None
    _net: TransformNet | None = field(default=None, repr=False, compare=False)

    def network(self) -> TransformNet:
        if self._net is None:
            net = TransformNet(
                residual_blocks=self.config.residual_blocks,
                base_channels=self.config.base_channels,
            )
            net.load_state_dict(self.state_dict)
            net.eval()
            self._net = net
        return self._net


def to_tensor(image: np.ndarray) -> torch.Tensor:
    """HxWx3 uint8 -> 3xHxW float32 in [0, 1]."""
    if image.dtype != np.uint8:
        raise ContractViolation(f"expected uint8 image, got {image.dtype}")
    return torch.from_numpy(image.astype(np.float32) / 255.0).permute(2, 0, 1)


def to_image(tensor: torch.Tensor) -> np.ndarray:
    """3xHxW float in [0, 1] -> HxWx3 uint8 with round-half-away clamping."""
    arr = tensor.detach().clamp(0.0, 1.0).mul(255.0).round().to(torch.uint8)
    return arr.permute(1, 2, 0).cpu().numpy()


def _resize_tensor(t: torch.Tensor, size: int) -> torch.Tensor:
    return torch.nn.functional.interpolate(
        t.unsqueeze(0), size=(size, size), mode="bilinear", align_corners=False, antialias=True
    )[0]


def train_style_model(
    style_image: np.ndarray,
    content_images: list[np.ndarray],
    config: StyleTrainConfig,
    *,
    channel: str = "whole",
    style_exemplar_id: str = "style",
    model_id: str | None = None,
    loss_network: LossNetwork | None = None,
) -> StyleModel:
    """Fit a transformation network to one style under perceptual losses.

    Content images are visited in corpus order, one per iteration.
    Raises TrainingDivergence as soon as any loss term goes non-finite.
    """
    if len(content_images) == 0:
        raise ContractViolation("content corpus is empty")
    if channel not in MODEL_CHANNELS:
        raise ContractViolation(f"unknown model channel {channel!r}")

    if loss_network is None:
        loss_network = load_loss_network(
            weights_file=config.loss_network_weights, seed=config.loss_network_seed
        )
    check_layers_known(config.layers, loss_network.known_layers)

    torch.manual_seed(config.seed)
    net = TransformNet(
        residual_blocks=config.residual_blocks, base_channels=config.base_channels
    )
    net.train()
    optimizer = torch.optim.Adam(net.parameters(), lr=config.learning_rate)

    style_t = to_tensor(style_image)
    with torch.no_grad():
        style_feats = loss_network.features_by_name(style_t, config.layers.style_layers)
        style_grams = {name: gram(f) for name, f in style_feats.items()}

    contents = [_resize_tensor(to_tensor(img), config.image_size) for img in content_images]
    content_feature_cache: list[dict[str, torch.Tensor]] = []
    with torch.no_grad():
        for t in contents:
            content_feature_cache.append(
                loss_network.features_by_name(t, config.layers.content_layers)
            )

    curve: list[dict] = []
    for it in range(config.iterations):
        idx = it % len(contents)
        x = contents[idx].unsqueeze(0)
        y = net(x)
        try:
            total, breakdown = perceptual_loss(
                y,
                x,
                weights=config.weights,
                layers=config.layers,
                net=loss_network,
                style_grams=style_grams,
                content_features=content_feature_cache[idx],
            )
        except ContractViolation as e:
            # A non-finite activation inside the loss trips the gram
            # finiteness guard; during training that is a divergence.
            raise TrainingDivergence(f"loss blew up at iteration {it}: {e}") from e
        if not math.isfinite(breakdown["total"]):
            raise TrainingDivergence(
                f"non-finite loss at iteration {it}: "
                f"content={breakdown['content']} style={breakdown['style']} tv={breakdown['tv']}"
            )
        optimizer.zero_grad()
        total.backward()
        optimizer.step()
        curve.append(
            {
                "iteration": it,
                "total": breakdown["total"],
                "content": breakdown["content"],
                "style": breakdown["style"],
                "tv": breakdown["tv"],
            }
        )
        if config.log_every and it % config.log_every == 0:
            logger.info(
                "style %s/%s iter %d: total=%.6g", style_exemplar_id, channel, it, breakdown["total"]
            )

    net.eval()
    return StyleModel(
        model_id=model_id or f"{style_exemplar_id}.{channel}",
        channel=channel,
        style_exemplar_id=style_exemplar_id,
        state_dict={k: v.detach().clone() for k, v in net.state_dict().items()},
        config=config,
        loss_curve=curve,
        loss_network_from=loss_network.pretrained_from or f"seeded:{config.loss_network_seed}",
    )


def stylize(model: StyleModel, image: np.ndarray) -> np.ndarray:
    """Apply a trained model; output matches input dimensions exactly.

    The network downsamples twice, so inputs are reflection-padded to a
    multiple of 4 and the output cropped back.
    """
    net = model.network()
    t = to_tensor(image).unsqueeze(0)
    _, _, h, w = t.shape
    pad_h = (4 - h % 4) % 4
    pad_w = (4 - w % 4) % 4
    if pad_h or pad_w:
        t = torch.nn.functional.pad(t, (0, pad_w, 0, pad_h), mode="reflect")
    with torch.no_grad():
        y = net(t)[0, :, :h, :w]
    return to_image(y)


# --- checkpoint persistence ---------------------------------------------

def save_style_model(model: StyleModel, out_dir: Path | str) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict, out_dir / "weights.pt")
    meta = {
        "model_id": model.model_id,
        "channel": model.channel,
        "style_exemplar_id": model.style_exemplar_id,
        "loss_network_from": model.loss_network_from,
        "training_config": model.config.to_dict(),
        "final_loss": model.loss_curve[-1]["total"] if model.loss_curve else None,
    }
    (out_dir / "config.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    with open(out_dir / "loss_curve.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["iteration", "total", "content", "style", "tv"])
        writer.writeheader()
        for row in model.loss_curve:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return out_dir


def load_style_model(model_dir: Path | str) -> StyleModel:
    model_dir = Path(model_dir)
    weights_path = model_dir / "weights.pt"
    meta_path = model_dir / "config.json"
    if not weights_path.exists() or not meta_path.exists():
        raise AssetMissingError(f"no style model checkpoint under {model_dir}")
    try:
        state = torch.load(weights_path, map_location="cpu", weights_only=True)
    except Exception as e:
        raise AssetMissingError(f"corrupt checkpoint {weights_path}: {e}") from e
    meta = json.loads(meta_path.read_text())
    curve = []
    curve_path = model_dir / "loss_curve.csv"
    if curve_path.exists():
        with open(curve_path, newline="") as fh:
            for row in csv.DictReader(fh):
                curve.append(
                    {
                        "iteration": int(row["iteration"]),
                        "total": float(row["total"]),
                        "content": float(row["content"]),
                        "style": float(row["style"]),
                        "tv": float(row["tv"]),
                    }
                )
    return StyleModel(
        model_id=meta["model_id"],
        channel=meta["channel"],
        style_exemplar_id=meta["style_exemplar_id"],
        state_dict=state,
        config=StyleTrainConfig.from_dict(meta["training_config"]),
        loss_curve=curve,
        loss_network_from=meta.get("loss_network_from"),
    )


class ModelStore:
    """Directory of checkpoints keyed by (style exemplar, channel)."""

    def __init__(self, root: Path | str):
        self.root = Path(root)

    def path(self, exemplar_id: str, channel: str) -> Path:
        return self.root / f"{exemplar_id}.{channel}"

    def exists(self, exemplar_id: str, channel: str) -> bool:
        return (self.path(exemplar_id, channel) / "weights.pt").exists()

    def save(self, model: StyleModel) -> Path:
        return save_style_model(model, self.path(model.style_exemplar_id, model.channel))

    def load(self, exemplar_id: str, channel: str) -> StyleModel:
        if not self.exists(exemplar_id, channel):
            raise AssetMissingError(
                f"missing style model for exemplar {exemplar_id!r}, channel {channel!r} "
                f"under {self.root}"
            )
        return load_style_model(self.path(exemplar_id, channel))
