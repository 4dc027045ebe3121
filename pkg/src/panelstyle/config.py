"""Run configuration: defaults, YAML files, overrides, and snapshots.

Precedence, lowest to highest: built-in defaults, the config file,
repeatable --set KEY=VALUE assignments, then dedicated command flags.
Every command writes a resolved snapshot beside its outputs; loading a
snapshot file reproduces the exact configuration of that run.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path

import yaml

from .errors import ConfigError

SNAPSHOT_NAME = "config.snapshot.yaml"

DEFAULTS: dict = {
    "seed": 0,
    "jobs": None,
    "paths": {
        "corpus": "work/corpus",
        "style_corpus": "work/style_corpus",
        "catalog": "work/catalog",
        "templates": None,
        "model_store": "work/models",
        "cloze_dir": "work/cloze",
        "output_root": "work/out",
    },
    "masks": {
        "variant": "rect",
    },
    "treatment": "CP,R_M",
    "stylenet": {
        "iterations": 300,
        "learning_rate": 1e-3,
        "image_size": 96,
        "residual_blocks": 5,
        "base_channels": 32,
        "weights": {"content": 1.0, "style": 1e5, "tv": 1e-6},
        "content_layers": ["relu2_2"],
        "style_layers": ["relu1_2", "relu2_2", "relu3_3", "relu4_3"],
        "loss_network_seed": 7,
        "loss_network_weights": None,
        "channels": ["whole", "textbox", "foreground", "background"],
        "max_content_images": 8,
        "log_every": 100,
    },
    "transfer": {
        "page_width_px": 800,
        "page_aspect": 1.5,
        "layout_seed": 0,
        "feather": 0,
    },
    "cloze": {
        "n_context": 3,
        "epochs": 12,
        "learning_rate": 1e-3,
        "batch_size": 32,
        "image_size": 64,
        "dev_fraction": 0.2,
        "encoder": "frozen",
        "fine_tune": False,
        "encoder_learning_rate": 1e-5,
    },
}

_MISSING = object()


def _deep_merge(base: dict, override: dict, crumbs: str = "") -> dict:
    out = dict(base)
    for key, value in override.items():
        where = f"{crumbs}.{key}" if crumbs else str(key)
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config section {where!r} must be a mapping")
            out[key] = _deep_merge(base[key], value, where)
        else:
            out[key] = value
    return out


def _coerce(value, default, where: str):
    """Align a loaded value with the default's type.

    PyYAML reads bare scientific notation like 1e-3 as a string, so
    numeric fields accept strings and convert; mismatches that cannot
    convert are config errors rather than silent type drift.
    """
    if default is None or value is None:
        return value
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false"):
            return value.lower() == "true"
        raise ConfigError(f"{where} must be a boolean, got {value!r}")
    if isinstance(default, (int, float)):
        if isinstance(value, bool):
            raise ConfigError(f"{where} must be a number, got {value!r}")
        if isinstance(value, str):
            try:
                value = float(value)
            except ValueError:
                raise ConfigError(f"{where} must be a number, got {value!r}") from None
        if isinstance(default, int):
            if float(value) != int(value):
                raise ConfigError(f"{where} must be an integer, got {value!r}")
            return int(value)
        return float(value)
    if isinstance(default, str) and not isinstance(value, str):
        raise ConfigError(f"{where} must be a string, got {value!r}")
    if isinstance(default, list) and not isinstance(value, list):
        raise ConfigError(f"{where} must be a list, got {value!r}")
    return value


def _coerce_tree(data: dict, defaults: dict, crumbs: str = "") -> dict:
    out = {}
    for key, value in data.items():
        where = f"{crumbs}.{key}" if crumbs else str(key)
        default = defaults.get(key)
        if isinstance(default, dict):
            out[key] = _coerce_tree(value, default, where)
        else:
            out[key] = _coerce(value, default, where)
    return out


def _validate(data: dict):
    from .cloze import ENCODER_IDS
    from .transfer import Treatment

    if data["masks"]["variant"] not in ("rect", "fit"):
        raise ConfigError(f"masks.variant must be rect or fit, got {data['masks']['variant']!r}")
    Treatment.parse(data["treatment"])
    cloze = data["cloze"]
    if cloze["encoder"] not in ENCODER_IDS:
        raise ConfigError(f"cloze.encoder must be one of {ENCODER_IDS}")
    if not 0 <= cloze["dev_fraction"] < 1:
        raise ConfigError("cloze.dev_fraction must be in [0, 1)")
    if cloze["n_context"] < 1:
        raise ConfigError("cloze.n_context must be >= 1")
    for key in ("epochs", "batch_size", "image_size"):
        if cloze[key] < 1:
            raise ConfigError(f"cloze.{key} must be >= 1")
    net = data["stylenet"]
    for key in ("iterations", "image_size", "residual_blocks", "base_channels"):
        if net[key] < 1:
            raise ConfigError(f"stylenet.{key} must be >= 1")
    bad = set(net["channels"]) - {"whole", "textbox", "foreground", "background"}
    if bad:
        raise ConfigError(f"unknown stylenet.channels {sorted(bad)}")
    if data["jobs"] is not None:
        if not isinstance(data["jobs"], int) or data["jobs"] < 1:
            raise ConfigError("jobs must be an integer >= 1")


@dataclass(frozen=True)
class RunConfig:
    data: dict
    base_dir: Path

    def get(self, dotted: str, default=_MISSING):
        node = self.data
        for part in dotted.split("."):
            if not isinstance(node, dict) or part not in node:
                if default is _MISSING:
                    raise ConfigError(f"no config value at {dotted!r}")
                return default
            node = node[part]
        return node

    def path(self, dotted: str) -> Path | None:
        value = self.get(dotted)
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    def with_overrides(self, assignments) -> "RunConfig":
        if not assignments:
            return self
        patch: dict = {}
        for item in assignments:
            key, sep, raw = str(item).partition("=")
            if not sep or not key:
                raise ConfigError(f"override must look like section.key=value, got {item!r}")
            try:
                value = yaml.safe_load(raw) if raw != "" else None
            except yaml.YAMLError as e:
                raise ConfigError(f"bad override value in {item!r}: {e}") from e
            node = patch
            parts = key.split(".")
            for part in parts[:-1]:
                node = node.setdefault(part, {})
            node[parts[-1]] = value
        merged = _coerce_tree(_deep_merge(self.data, patch), DEFAULTS)
        _validate(merged)
        return RunConfig(data=merged, base_dir=self.base_dir)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=True, default_flow_style=False)


def default_config(base_dir: Path | str = ".") -> RunConfig:
    data = copy.deepcopy(DEFAULTS)
    return RunConfig(data=data, base_dir=Path(base_dir).resolve())


def load_run_config(path: Path | str | None = None, overrides=()) -> RunConfig:
    """Load a config file (or a run snapshot, recognized by layout)."""
    if path is None:
        config = default_config()
        return config.with_overrides(overrides)
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse config {path}: {e}") from e
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(f"config root must be a mapping: {path}")
    if "config" in doc and "command" in doc:
        doc = doc["config"]  # run snapshot layout
    merged = _coerce_tree(_deep_merge(copy.deepcopy(DEFAULTS), doc), DEFAULTS)
    _validate(merged)
    config = RunConfig(data=merged, base_dir=path.resolve().parent)
    return config.with_overrides(overrides)


def resolved_data(config: RunConfig) -> dict:
    """Config data with every path entry made absolute."""
    data = copy.deepcopy(config.data)
    for key, value in data["paths"].items():
        if value is not None:
            p = Path(value)
            data["paths"][key] = str(p if p.is_absolute() else config.base_dir / p)
    return data


def write_snapshot(
    config: RunConfig, out_dir: Path | str, command: str, args: dict | None = None
) -> Path:
    """Persist the resolved configuration beside a command's outputs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {
        "command": command,
        "args": {} if args is None else args,
        "config": resolved_data(config),
    }
    path = out_dir / SNAPSHOT_NAME
    path.write_text(yaml.safe_dump(doc, sort_keys=True, default_flow_style=False))
    return path
