"""Perceptual loss terms for feedforward style transfer.

All functions accept torch tensors and preserve their dtype, so the same
code runs the float32 training path and the float64 gradient checks.
Feature maps are (C, H, W) or batched (B, C, H, W).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from ..errors import ConfigError, ContractViolation


@dataclass(frozen=True)
class LossWeights:
    content: float = 1.0
    style: float = 1e5
    tv: float = 1e-6

    def __post_init__(self):
        if self.content < 0 or self.style < 0 or self.tv < 0:
            raise ValueError("loss weights must be non-negative")
        if self.content == 0 and self.style == 0 and self.tv == 0:
            raise ValueError("at least one loss weight must be positive")


@dataclass(frozen=True)
class LayerSelection:
    content_layers: tuple[str, ...] = ("relu2_2",)
    style_layers: tuple[str, ...] = ("relu1_2", "relu2_2", "relu3_3", "relu4_3")

    @property
    def all_layers(self) -> tuple[str, ...]:
        seen = []
        for name in (*self.content_layers, *self.style_layers):
            if name not in seen:
                seen.append(name)
        return tuple(seen)


def _as_batched(f: torch.Tensor) -> torch.Tensor:
    if f.dim() == 3:
        return f.unsqueeze(0)
    if f.dim() == 4:
        return f
    raise ContractViolation(f"feature map must be 3-D or 4-D, got shape {tuple(f.shape)}")


def gram(f: torch.Tensor) -> torch.Tensor:
    """Normalized Gram matrix: unroll to C x (H*W), then psi @ psi.T / (C*H*W)."""
    if not torch.isfinite(f).all():
        raise ContractViolation("feature map contains non-finite values")
    batched = _as_batched(f)
    b, c, h, w = batched.shape
    psi = batched.reshape(b, c, h * w)
    g = torch.bmm(psi, psi.transpose(1, 2)) / (c * h * w)
    return g if f.dim() == 4 else g[0]


def feature_loss(f_out: torch.Tensor, f_content: torch.Tensor) -> torch.Tensor:
    """Squared Euclidean distance normalized by the map's C*H*W size."""
    if f_out.shape != f_content.shape:
        raise ContractViolation(
            f"feature shapes differ: {tuple(f_out.shape)} vs {tuple(f_content.shape)}"
        )
    a = _as_batched(f_out)
    b = _as_batched(f_content)
    _, c, h, w = a.shape
    per_item = ((a - b) ** 2).sum(dim=(1, 2, 3)) / (c * h * w)
    return per_item.mean()


def style_loss(f_out: torch.Tensor, f_style: torch.Tensor) -> torch.Tensor:
    """Squared Frobenius norm between Gram matrices.

    Spatial sizes may differ; channel counts must match.
    """
    a = _as_batched(f_out)
    b = _as_batched(f_style)
    if a.shape[1] != b.shape[1]:
        raise ContractViolation(
            f"channel counts differ: {a.shape[1]} vs {b.shape[1]}"
        )
    return style_loss_from_gram(f_out, gram(f_style))


def style_loss_from_gram(f_out: torch.Tensor, target_gram: torch.Tensor) -> torch.Tensor:
    """Style loss against a precomputed target Gram matrix."""
    g = gram(f_out)
    if g.dim() == 2:
        g = g.unsqueeze(0)
    if target_gram.dim() == 2:
        target_gram = target_gram.unsqueeze(0)
    if g.shape[-1] != target_gram.shape[-1]:
        raise ContractViolation(
            f"gram sizes differ: {g.shape[-1]} vs {target_gram.shape[-1]}"
        )
    per_item = ((g - target_gram) ** 2).sum(dim=(1, 2))
    return per_item.mean()


def total_variation(img: torch.Tensor) -> torch.Tensor:
    """Squared-difference total variation over horizontal and vertical neighbors."""
    x = _as_batched(img)
    dh = ((x[:, :, :, 1:] - x[:, :, :, :-1]) ** 2).sum(dim=(1, 2, 3))
    dv = ((x[:, :, 1:, :] - x[:, :, :-1, :]) ** 2).sum(dim=(1, 2, 3))
    return (dh + dv).mean()


def perceptual_loss(
    output: torch.Tensor,
    content: torch.Tensor,
    style: torch.Tensor | None = None,
    *,
    weights: LossWeights,
    layers: LayerSelection,
    net,
    style_grams: dict[str, torch.Tensor] | None = None,
    content_features: dict[str, torch.Tensor] | None = None,
) -> tuple[torch.Tensor, dict]:
    """Weighted combination of content, style, and TV terms.

    ``output``/``content``/``style`` are RGB images in [0, 1], shaped
    (3, H, W) or (B, 3, H, W). Style targets may be passed as
    precomputed Gram matrices instead of a style image (training reuses
    them across iterations). Returns the total (a scalar tensor that
    supports backward) and a per-term breakdown of plain floats.
    """
    if style is None and style_grams is None and weights.style > 0:
        raise ContractViolation("style image or precomputed grams required")

    out_feats = net.features_by_name(output, layers.all_layers)
    if content_features is None:
        with torch.no_grad():
            content_features = net.features_by_name(content, layers.content_layers)
    if style_grams is None and weights.style > 0:
        with torch.no_grad():
            style_feats = net.features_by_name(style, layers.style_layers)
        style_grams = {name: gram(style_feats[name]) for name in layers.style_layers}

    zero = output.sum() * 0
    content_term = zero.clone()
    per_content = {}
    for name in layers.content_layers:
        value = feature_loss(out_feats[name], content_features[name])
        per_content[name] = float(value.detach())
        content_term = content_term + value

    style_term = zero.clone()
    per_style = {}
    if weights.style > 0:
        for name in layers.style_layers:
            value = style_loss_from_gram(out_feats[name], style_grams[name])
            per_style[name] = float(value.detach())
            style_term = style_term + value

    tv_term = total_variation(output)

    total = (
        weights.content * content_term
        + weights.style * style_term
        + weights.tv * tv_term
    )
    breakdown = {
        "content": float((weights.content * content_term).detach()),
        "style": float((weights.style * style_term).detach()),
        "tv": float((weights.tv * tv_term).detach()),
        "total": float(total.detach()),
        "content_layers": per_content,
        "style_layers": per_style,
    }
    return total, breakdown


def check_layers_known(layers: LayerSelection, known: tuple[str, ...]):
    for name in layers.all_layers:
        if name not in known:
            raise ConfigError(f"layer {name!r} not present in loss network (known: {known})")
