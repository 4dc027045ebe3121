"""Network definitions: the trainable transformation net and the fixed
loss network.

The loss network mirrors the 16-layer VGG convolutional stack.
Pretrained ImageNet weights are loaded from a local file when available
(CPST_CACHE or an explicit path); otherwise the stack is initialized
from a fixed seed so every run in a weightless environment still agrees
bit-for-bit.
"""

from __future__ import annotations

import os
from pathlib import Path

import torch
import torch.nn as nn

from ..errors import AssetMissingError, ConfigError

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

# Conv plan of the 16-layer VGG configuration; 'M' is 2x2 max pooling.
VGG16_CFG = (64, 64, "M", 128, 128, "M", 256, 256, 256, "M", 512, 512, 512, "M", 512, 512, 512, "M")

# Activation name -> index in the sequential feature stack (torchvision
# numbering, so cached torchvision checkpoints load directly).
VGG16_LAYER_INDEX = {
    "relu1_1": 1, "relu1_2": 3,
    "relu2_1": 6, "relu2_2": 8,
    "relu3_1": 11, "relu3_2": 13, "relu3_3": 15,
    "relu4_1": 18, "relu4_2": 20, "relu4_3": 22,
    "relu5_1": 25, "relu5_2": 27, "relu5_3": 29,
}

DEFAULT_LOSS_NETWORK_SEED = 7
CACHE_ENV_VAR = "CPST_CACHE"
VGG16_CACHE_NAME = "vgg16.pt"


def cached_weights_path(name: str) -> Path | None:
    root = os.environ.get(CACHE_ENV_VAR)
    if root:
        candidate = Path(root) / name
        if candidate.exists():
            return candidate
    return None


def make_vgg16_features(up_to_index: int | None = None) -> nn.Sequential:
    """Build the VGG16 conv stack, optionally truncated after an index."""
    layers: list[nn.Module] = []
    in_ch = 3
    for item in VGG16_CFG:
        if item == "M":
            layers.append(nn.MaxPool2d(kernel_size=2, stride=2))
        else:
            layers.append(nn.Conv2d(in_ch, int(item), kernel_size=3, padding=1))
            layers.append(nn.ReLU(inplace=False))
            in_ch = int(item)
        if up_to_index is not None and len(layers) > up_to_index:
            break
    if up_to_index is not None:
        layers = layers[: up_to_index + 1]
    return nn.Sequential(*layers)


def _init_vgg_weights(module: nn.Module):
    for m in module.modules():
        if isinstance(m, nn.Conv2d):
            nn.init.kaiming_normal_(m.weight, mode="fan_out", nonlinearity="relu")
            nn.init.constant_(m.bias, 0)
        elif isinstance(m, nn.Linear):
            nn.init.normal_(m.weight, 0, 0.01)
            nn.init.constant_(m.bias, 0)


class LossNetwork(nn.Module):
    """Fixed feature extractor exposing named activations.

    Inputs are RGB in [0, 1]; ImageNet channel statistics are applied
    internally. Parameters never receive gradients.
    """

    def __init__(self, max_layer: str = "relu4_3", weights_file: Path | str | None = None,
                 seed: int = DEFAULT_LOSS_NETWORK_SEED):
        super().__init__()
        if max_layer not in VGG16_LAYER_INDEX:
            raise ConfigError(f"unknown loss-network layer {max_layer!r}")
        self.max_layer = max_layer
        max_index = VGG16_LAYER_INDEX[max_layer]

        torch.manual_seed(seed)
        self.features = make_vgg16_features(max_index)
        _init_vgg_weights(self.features)
        self.pretrained_from = None
        if weights_file is not None:
            state = torch.load(weights_file, map_location="cpu", weights_only=True)
            # Accept either a bare features state dict or a full VGG16 one.
            feat_state = {
                k.removeprefix("features."): v
                for k, v in state.items()
                if k.startswith("features.")
            } or state
            own = self.features.state_dict()
            self.features.load_state_dict({k: v for k, v in feat_state.items() if k in own})
            self.pretrained_from = str(weights_file)

        # Kept in float64 so double-precision checks see the exact
        # constants; cast down at use time for float32 inputs.
        mean = torch.tensor(IMAGENET_MEAN, dtype=torch.float64).view(1, 3, 1, 1)
        std = torch.tensor(IMAGENET_STD, dtype=torch.float64).view(1, 3, 1, 1)
        self.register_buffer("mean", mean)
        self.register_buffer("std", std)
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    @property
    def known_layers(self) -> tuple[str, ...]:
        limit = VGG16_LAYER_INDEX[self.max_layer]
        return tuple(n for n, i in VGG16_LAYER_INDEX.items() if i <= limit)

    def features_by_name(self, image: torch.Tensor, names) -> dict[str, torch.Tensor]:
        """Run the stack once, collecting the requested activations."""
        for name in names:
            if name not in VGG16_LAYER_INDEX:
                raise ConfigError(f"unknown loss-network layer {name!r}")
            if VGG16_LAYER_INDEX[name] > VGG16_LAYER_INDEX[self.max_layer]:
                raise ConfigError(
                    f"layer {name!r} beyond network truncation at {self.max_layer!r}"
                )
        x = image.unsqueeze(0) if image.dim() == 3 else image
        x = (x - self.mean.to(x.dtype)) / self.std.to(x.dtype)
        wanted = {VGG16_LAYER_INDEX[n]: n for n in names}
        out: dict[str, torch.Tensor] = {}
        for idx, layer in enumerate(self.features):
            x = layer(x)
            if idx in wanted:
                out[wanted[idx]] = x
            if len(out) == len(wanted):
                break
        return out


def load_loss_network(
    weights_file: Path | str | None = None,
    seed: int = DEFAULT_LOSS_NETWORK_SEED,
    max_layer: str = "relu4_3",
) -> LossNetwork:
    """Resolve loss-network weights: explicit path, then CPST_CACHE, then seed."""
    if weights_file is not None:
        if not Path(weights_file).exists():
            raise AssetMissingError(f"loss network weights not found: {weights_file}")
        return LossNetwork(max_layer=max_layer, weights_file=weights_file, seed=seed)
    cached = cached_weights_path(VGG16_CACHE_NAME)
    return LossNetwork(max_layer=max_layer, weights_file=cached, seed=seed)


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1, padding_mode="reflect")
        self.norm1 = nn.InstanceNorm2d(channels, affine=True)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1, padding_mode="reflect")
        self.norm2 = nn.InstanceNorm2d(channels, affine=True)
        self.relu = nn.ReLU()

    def forward(self, x):
        y = self.relu(self.norm1(self.conv1(x)))
        y = self.norm2(self.conv2(y))
        return x + y


class UpsampleConv(nn.Module):
    """Nearest-neighbor upsample followed by conv, to avoid checkerboard
    artifacts from transposed convolution."""

    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        self.conv = nn.Conv2d(in_ch, out_ch, 3, padding=1, padding_mode="reflect")
        self.norm = nn.InstanceNorm2d(out_ch, affine=True)
        self.relu = nn.ReLU()

    def forward(self, x):
        x = nn.functional.interpolate(x, scale_factor=2, mode="nearest")
        return self.relu(self.norm(self.conv(x)))


class TransformNet(nn.Module):
    """Image-to-image residual network: downsample, residual blocks, upsample.

    Maps RGB in [0, 1] to RGB in (0, 1); fully convolutional, so any
    input size divisible by 4 keeps its spatial dimensions.
    """

    def __init__(self, residual_blocks: int = 5, base_channels: int = 32):
        super().__init__()
        c = base_channels
        self.encode = nn.Sequential(
            nn.Conv2d(3, c, 9, padding=4, padding_mode="reflect"),
            nn.InstanceNorm2d(c, affine=True),
            nn.ReLU(),
            nn.Conv2d(c, 2 * c, 3, stride=2, padding=1),
            nn.InstanceNorm2d(2 * c, affine=True),
            nn.ReLU(),
            nn.Conv2d(2 * c, 4 * c, 3, stride=2, padding=1),
            nn.InstanceNorm2d(4 * c, affine=True),
            nn.ReLU(),
        )
        self.residual = nn.Sequential(*[ResidualBlock(4 * c) for _ in range(residual_blocks)])
        self.decode = nn.Sequential(
            UpsampleConv(4 * c, 2 * c),
            UpsampleConv(2 * c, c),
            nn.Conv2d(c, 3, 9, padding=4, padding_mode="reflect"),
        )

    def forward(self, x):
        y = self.decode(self.residual(self.encode(x)))
        return torch.sigmoid(y)
