"""Visual story-cloze construction, scoring, and evaluation.

An instance is n context panels plus 3 candidate continuations, exactly
one of which is the true next panel in reading order. Panels are encoded
to 4096-d fc7 vectors; an LSTM folds the context into a 512-d state,
candidates are projected into the same space, and the three inner
products are softmax-normalized. Accuracy over an instance set, with
panel images swapped between originals and transfer outputs, measures
how much a treatment disturbs narrative coherence.
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
import torch.nn as nn
from PIL import Image

from .corpus import PageRecord
from .errors import AssetMissingError, ContractViolation, SchemaError, TrainingDivergence
from .stylenet.networks import (
    IMAGENET_MEAN,
    IMAGENET_STD,
    VGG16_CACHE_NAME,
    cached_weights_path,
    make_vgg16_features,
)
from .transfer import EVAL_SETTINGS

logger = logging.getLogger(__name__)

N_CANDIDATES = 3
EMBED_DIM = 4096
PROJ_DIM = 512
ENCODER_IDS = ("feature_C", "feature_M", "frozen")
DEFAULT_ENCODER_SEED = 13
MIN_DISTRACTOR_PAGE_GAP = 2


# --- instances -----------------------------------------------------------

@dataclass(frozen=True)
class ClozeInstance:
    instance_id: str
    book_id: str
    page_id: str
    panel_span: tuple[int, int]
    context: tuple[str, ...]
    candidates: tuple[str, ...]
    answer_index: int

    def __post_init__(self):
        if len(self.candidates) != N_CANDIDATES:
            raise ContractViolation(
                f"instance {self.instance_id}: {len(self.candidates)} candidates"
            )
        if not (0 <= self.answer_index < N_CANDIDATES):
            raise ContractViolation(
                f"instance {self.instance_id}: answer index {self.answer_index}"
            )


def panel_ref(page_id: str, panel_id: str) -> str:
    """Relative image path shared by the corpus crops and transfer output
    trees, so one manifest evaluates under any setting via root swap."""
    return f"{page_id}/{panel_id}.png"


def build_cloze_set(
    pages: list[PageRecord], n_context: int = 3, seed: int = 0
) -> list[ClozeInstance]:
    """Slide windows over each page's reading order and attach distractors.

    Distractors are panels from the same book at least two pages away
    (page distance measured by position in the ingested sequence). The
    answer's slot among the candidates is shuffled; everything is
    deterministic in the seed.
    """
    if n_context < 1:
        raise ContractViolation(f"n_context must be >= 1, got {n_context}")
    rng = np.random.default_rng(seed)
    by_book: dict[str, list[PageRecord]] = {}
    for page in pages:
        by_book.setdefault(page.book_id, []).append(page)

    instances: list[ClozeInstance] = []
    for book_id, book_pages in by_book.items():
        for pos, page in enumerate(book_pages):
            panels = sorted(page.panels, key=lambda p: p.reading_index)
            if len(panels) < n_context + 1:
                logger.info(
                    "page %s: %d panels < n_context+1=%d, no instances",
                    page.page_id, len(panels), n_context + 1,
                )
                continue
            pool = [
                (other.page_id, p.panel_id)
                for other_pos, other in enumerate(book_pages)
                if abs(other_pos - pos) >= MIN_DISTRACTOR_PAGE_GAP
                for p in other.panels
            ]
            if len(pool) < N_CANDIDATES - 1:
                logger.warning(
                    "page %s: distractor pool too small (%d), skipped",
                    page.page_id, len(pool),
                )
                continue
            for start in range(len(panels) - n_context):
                context = panels[start : start + n_context]
                answer = panels[start + n_context]
                picks = rng.choice(len(pool), size=N_CANDIDATES - 1, replace=False)
                distractors = [panel_ref(*pool[int(i)]) for i in picks]
                answer_index = int(rng.integers(N_CANDIDATES))
                candidates = list(distractors)
                candidates.insert(answer_index, panel_ref(page.page_id, answer.panel_id))
                instances.append(
                    ClozeInstance(
                        instance_id=f"{book_id}.{page.page_id}.w{start}",
                        book_id=book_id,
                        page_id=page.page_id,
                        panel_span=(context[0].reading_index, answer.reading_index),
                        context=tuple(panel_ref(page.page_id, p.panel_id) for p in context),
                        candidates=tuple(candidates),
                        answer_index=answer_index,
                    )
                )
    return instances


def split_instances(
    instances: list[ClozeInstance], dev_fraction: float = 0.2, seed: int = 0
) -> tuple[list[ClozeInstance], list[ClozeInstance]]:
    """Deterministic train/dev split grouped by page (no page straddles)."""
    page_ids = sorted({inst.page_id for inst in instances})
    rng = np.random.default_rng(seed)
    shuffled = list(rng.permutation(page_ids))
    n_dev = max(1, int(round(dev_fraction * len(shuffled)))) if shuffled else 0
    dev_pages = set(shuffled[:n_dev])
    train = [i for i in instances if i.page_id not in dev_pages]
    dev = [i for i in instances if i.page_id in dev_pages]
    return train, dev


def save_cloze_set(
    instances: list[ClozeInstance], path: Path | str, n_context: int | None = None
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if n_context is None and instances:
        n_context = len(instances[0].context)
    doc = {
        "n_context": n_context,
        "instances": [
            {
                "instance_id": i.instance_id,
                "book_id": i.book_id,
                "page_id": i.page_id,
                "panel_span": list(i.panel_span),
                "context": list(i.context),
                "candidates": list(i.candidates),
                "answer_index": i.answer_index,
            }
            for i in instances
        ],
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True))
    return path


def load_cloze_set(path: Path | str) -> list[ClozeInstance]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
        rows = doc["instances"]
    except FileNotFoundError:
        raise
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise SchemaError(f"bad cloze manifest: {e}", path=str(path)) from e
    out = []
    for row in rows:
        out.append(
            ClozeInstance(
                instance_id=row["instance_id"],
                book_id=row["book_id"],
                page_id=row["page_id"],
                panel_span=tuple(row["panel_span"]),
                context=tuple(row["context"]),
                candidates=tuple(row["candidates"]),
                answer_index=int(row["answer_index"]),
            )
        )
    return out


# --- panel encoder -------------------------------------------------------

class PanelEncoder(nn.Module):
    """16-layer VGG through fc7: images in [0, 1] to 4096-d vectors.

    Accepts a full torchvision-format checkpoint (features.* plus
    classifier.0/classifier.3 for fc6/fc7); otherwise weights come from
    a fixed seed so weightless environments stay reproducible.
    """

    def __init__(self, weights_file: Path | str | None = None, seed: int = DEFAULT_ENCODER_SEED):
        super().__init__()
        torch.manual_seed(seed)
        self.features = make_vgg16_features()
        self.avgpool = nn.AdaptiveAvgPool2d((7, 7))
        self.fc6 = nn.Linear(512 * 7 * 7, EMBED_DIM)
        self.fc7 = nn.Linear(EMBED_DIM, EMBED_DIM)
        for m in self.modules():
            if isinstance(m, nn.Conv2d):
                nn.init.kaiming_normal_(m.weight, mode="fan_out", nonlinearity="relu")
                nn.init.constant_(m.bias, 0)
            elif isinstance(m, nn.Linear):
                nn.init.normal_(m.weight, 0, 0.01)
                nn.init.constant_(m.bias, 0)
        self.pretrained_from = None
        if weights_file is not None:
            state = torch.load(weights_file, map_location="cpu", weights_only=True)
            own = self.state_dict()
            mapped = {}
            for k, v in state.items():
                key = (
                    k.replace("classifier.0.", "fc6.").replace("classifier.3.", "fc7.")
                    if k.startswith("classifier.")
                    else k
                )
                if key in own and own[key].shape == v.shape:
                    mapped[key] = v
            self.load_state_dict({**own, **mapped})
            self.pretrained_from = str(weights_file)
        mean = torch.tensor(IMAGENET_MEAN, dtype=torch.float64).view(1, 3, 1, 1)
        std = torch.tensor(IMAGENET_STD, dtype=torch.float64).view(1, 3, 1, 1)
        self.register_buffer("mean", mean)
        self.register_buffer("std", std)
        self.eval()

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        x = images.unsqueeze(0) if images.dim() == 3 else images
        x = (x - self.mean.to(x.dtype)) / self.std.to(x.dtype)
        x = self.features(x)
        x = self.avgpool(x).flatten(1)
        x = torch.relu(self.fc6(x))
        x = torch.relu(self.fc7(x))
        return x


def load_encoder(
    encoder_id: str,
    encoder_dir: Path | str | None = None,
    weights_file: Path | str | None = None,
    seed: int = DEFAULT_ENCODER_SEED,
) -> PanelEncoder:
    """Resolve an encoder: fine-tuned state, explicit file, cache, or seed.

    ``frozen`` uses base weights (explicit file, then CPST_CACHE, then
    seeded init). The fine-tuned ids require a saved state under
    ``encoder_dir``.
    """
    if encoder_id not in ENCODER_IDS:
        raise ContractViolation(f"unknown encoder id {encoder_id!r} (known: {ENCODER_IDS})")
    if encoder_id != "frozen":
        if encoder_dir is None:
            raise AssetMissingError(
                f"encoder {encoder_id!r} is fine-tuned; an encoder directory is required"
            )
        state_path = Path(encoder_dir) / f"{encoder_id}.pt"
        if not state_path.exists():
            raise AssetMissingError(f"no fine-tuned encoder state at {state_path}")
        enc = PanelEncoder(seed=seed)
        enc.load_state_dict(torch.load(state_path, map_location="cpu", weights_only=True))
        enc.pretrained_from = str(state_path)
        enc.eval()
        return enc
    if weights_file is not None:
        if not Path(weights_file).exists():
            raise AssetMissingError(f"encoder weights not found: {weights_file}")
        return PanelEncoder(weights_file=weights_file, seed=seed)
    return PanelEncoder(weights_file=cached_weights_path(VGG16_CACHE_NAME), seed=seed)


def _image_to_tensor(image: np.ndarray, image_size: int) -> torch.Tensor:
    t = torch.from_numpy(image.astype(np.float32) / 255.0).permute(2, 0, 1)
    return torch.nn.functional.interpolate(
        t.unsqueeze(0), size=(image_size, image_size),
        mode="bilinear", align_corners=False, antialias=True,
    )[0]


def encode_panel(
    image: np.ndarray, encoder: PanelEncoder, image_size: int = 64
) -> np.ndarray:
    """One raster to its 4096-d embedding (deterministic per encoder)."""
    with torch.no_grad():
        vec = encoder(_image_to_tensor(image, image_size).unsqueeze(0))[0]
    out = vec.numpy()
    if not np.isfinite(out).all():
        raise ContractViolation("encoder produced non-finite embedding")
    return out


def load_panel_image(root: Path | str, ref: str) -> np.ndarray:
    path = Path(root) / ref
    if not path.exists():
        raise AssetMissingError(f"panel image not found: {path}")
    return np.asarray(Image.open(path).convert("RGB"))


class EmbeddingCache:
    """Per-root memo of panel embeddings keyed by manifest ref."""

    def __init__(self, root: Path | str, encoder: PanelEncoder, image_size: int = 64):
        self.root = Path(root)
        self.encoder = encoder
        self.image_size = image_size
        self._store: dict[str, np.ndarray] = {}

    def get(self, ref: str) -> np.ndarray:
        if ref not in self._store:
            image = load_panel_image(self.root, ref)
            self._store[ref] = encode_panel(image, self.encoder, self.image_size)
        return self._store[ref]

    def warm(self, instances: list[ClozeInstance]):
        for inst in instances:
            for ref in (*inst.context, *inst.candidates):
                self.get(ref)


# --- scorer --------------------------------------------------------------

class ClozeScorer(nn.Module):
    """LSTM context encoder plus linear candidate projection."""

    def __init__(self, embed_dim: int = EMBED_DIM, hidden_dim: int = PROJ_DIM, seed: int = 0):
        super().__init__()
        torch.manual_seed(seed)
        self.lstm = nn.LSTM(embed_dim, hidden_dim, batch_first=True)
        self.candidate_proj = nn.Linear(embed_dim, hidden_dim)

    def forward(self, context: torch.Tensor, candidates: torch.Tensor) -> torch.Tensor:
        """context (B, n, E), candidates (B, 3, E) -> logits (B, 3)."""
        _, (h, _) = self.lstm(context)
        state = h[-1]  # (B, hidden)
        projected = self.candidate_proj(candidates)  # (B, 3, hidden)
        return torch.bmm(projected, state.unsqueeze(2)).squeeze(2)


def softmax_probs(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    shifted = np.exp(logits - logits.max(axis=-1, keepdims=True))
    return shifted / shifted.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class ClozeTrainConfig:
    seed: int = 0
    epochs: int = 30
    learning_rate: float = 1e-3
    batch_size: int = 32
    image_size: int = 64
    hidden_dim: int = PROJ_DIM
    encoder_id: str = "frozen"
    fine_tune_encoder: bool = False
    encoder_learning_rate: float = 1e-5
    log_every: int = 1

    def __post_init__(self):
        if self.encoder_id not in ENCODER_IDS:
            raise ContractViolation(f"unknown encoder id {self.encoder_id!r}")
        if self.fine_tune_encoder and self.encoder_id == "frozen":
            raise ContractViolation("fine_tune_encoder requires a tunable encoder id")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ClozeTrainConfig":
        return cls(**d)


@dataclass
class ClozeModel:
    encoder_id: str
    scorer_state: dict
    config: ClozeTrainConfig
    history: list[dict] = field(default_factory=list)
    encoder_state: dict | None = None
    _scorer: ClozeScorer | None = field(default=None, repr=False, compare=False)

    def scorer(self) -> ClozeScorer:
        if self._scorer is None:
            s = ClozeScorer(hidden_dim=self.config.hidden_dim, seed=self.config.seed)
            s.load_state_dict(self.scorer_state)
            s.eval()
            self._scorer = s
        return self._scorer

    def encoder(self, **kwargs) -> PanelEncoder:
        """The encoder this model was trained with."""
        if self.encoder_state is not None:
            enc = PanelEncoder()
            enc.load_state_dict(self.encoder_state)
            enc.eval()
            return enc
        return load_encoder("frozen", **kwargs)


def score_candidates(
    context: list[np.ndarray] | np.ndarray,
    candidates: list[np.ndarray] | np.ndarray,
    model: ClozeModel,
) -> np.ndarray:
    """Probabilities over the three candidates for one instance."""
    candidates = np.asarray(candidates, dtype=np.float32)
    if candidates.shape[0] != N_CANDIDATES:
        raise ContractViolation(f"expected {N_CANDIDATES} candidates, got {candidates.shape[0]}")
    context = np.asarray(context, dtype=np.float32)
    with torch.no_grad():
        logits = model.scorer()(
            torch.from_numpy(context).unsqueeze(0),
            torch.from_numpy(candidates).unsqueeze(0),
        )[0].numpy()
    return softmax_probs(logits)


def _instance_tensors(
    instances: list[ClozeInstance], cache: EmbeddingCache
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    contexts = np.stack(
        [np.stack([cache.get(r) for r in inst.context]) for inst in instances]
    )
    candidates = np.stack(
        [np.stack([cache.get(r) for r in inst.candidates]) for inst in instances]
    )
    answers = np.array([inst.answer_index for inst in instances], dtype=np.int64)
    return (
        torch.from_numpy(contexts.astype(np.float32)),
        torch.from_numpy(candidates.astype(np.float32)),
        torch.from_numpy(answers),
    )


def _batched_logits(
    scorer: ClozeScorer,
    encoder: PanelEncoder | None,
    instances: list[ClozeInstance],
    cache: EmbeddingCache,
    batch_size: int,
    image_size: int,
) -> torch.Tensor:
    """Logits for a list of instances; encoder given -> gradients flow."""
    chunks = []
    for lo in range(0, len(instances), batch_size):
        batch = instances[lo : lo + batch_size]
        if encoder is None:
            ctx, cand, _ = _instance_tensors(batch, cache)
        else:
            refs = sorted({r for i in batch for r in (*i.context, *i.candidates)})
            images = torch.stack(
                [
                    _image_to_tensor(load_panel_image(cache.root, r), image_size)
                    for r in refs
                ]
            )
            vectors = encoder(images)
            index = {r: k for k, r in enumerate(refs)}
            ctx = torch.stack(
                [torch.stack([vectors[index[r]] for r in i.context]) for i in batch]
            )
            cand = torch.stack(
                [torch.stack([vectors[index[r]] for r in i.candidates]) for i in batch]
            )
        chunks.append(scorer(ctx, cand))
    return torch.cat(chunks)


def accuracy_pct(
    model: ClozeModel,
    instances: list[ClozeInstance],
    cache: EmbeddingCache,
    batch_size: int = 32,
) -> float:
    with torch.no_grad():
        logits = _batched_logits(
            model.scorer(), None, instances, cache, batch_size, model.config.image_size
        )
    predicted = logits.argmax(dim=1).numpy()
    answers = np.array([i.answer_index for i in instances])
    return 100.0 * float((predicted == answers).mean())


def train_cloze_model(
    train_set: list[ClozeInstance],
    images_root: Path | str,
    config: ClozeTrainConfig,
    *,
    dev_set: list[ClozeInstance] | None = None,
    encoder: PanelEncoder | None = None,
    encoder_weights: Path | str | None = None,
    embedding_cache: EmbeddingCache | None = None,
) -> ClozeModel:
    """Cross-entropy training of the scorer (optionally the encoder too).

    With a frozen encoder all embeddings are precomputed once; passing a
    pre-warmed ``embedding_cache`` skips that step (the caller is
    responsible for it matching ``images_root`` and the encoder).
    Training order is reshuffled per epoch from the config seed; a
    non-finite loss aborts with a divergence error.
    """
    if not train_set:
        raise ContractViolation("training set is empty")
    if encoder is None:
        if embedding_cache is not None:
            encoder = embedding_cache.encoder
        else:
            base_id = "frozen" if config.encoder_id in ("frozen",) else config.encoder_id
            try:
                encoder = load_encoder(base_id, weights_file=encoder_weights)
            except AssetMissingError:
                # Fine-tuned ids start from base weights when no prior state exists.
                encoder = load_encoder("frozen", weights_file=encoder_weights)
    cache = embedding_cache or EmbeddingCache(images_root, encoder, config.image_size)
    tune = config.fine_tune_encoder

    torch.manual_seed(config.seed)
    scorer = ClozeScorer(hidden_dim=config.hidden_dim, seed=config.seed)
    scorer.train()
    params = [{"params": scorer.parameters(), "lr": config.learning_rate}]
    if tune:
        encoder.train()
        params.append({"params": encoder.parameters(), "lr": config.encoder_learning_rate})
    else:
        cache.warm(train_set)
    optimizer = torch.optim.Adam(params)

    order_rng = np.random.default_rng(config.seed)
    history: list[dict] = []
    for epoch in range(config.epochs):
        order = order_rng.permutation(len(train_set))
        epoch_loss = 0.0
        n_batches = 0
        for lo in range(0, len(train_set), config.batch_size):
            batch = [train_set[int(i)] for i in order[lo : lo + config.batch_size]]
            logits = _batched_logits(
                scorer, encoder if tune else None, batch, cache,
                len(batch), config.image_size,
            )
            answers = torch.tensor([i.answer_index for i in batch], dtype=torch.int64)
            loss = torch.nn.functional.cross_entropy(logits, answers)
            loss_value = float(loss.detach())
            if not math.isfinite(loss_value):
                raise TrainingDivergence(f"non-finite cloze loss in epoch {epoch}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_loss += loss_value
            n_batches += 1
        row = {"epoch": epoch, "loss": epoch_loss / max(1, n_batches)}
        if dev_set:
            scorer.eval()
            if tune:
                encoder.eval()
                dev_cache = EmbeddingCache(images_root, encoder, config.image_size)
            else:
                dev_cache = cache
            snapshot = ClozeModel(
                encoder_id=config.encoder_id,
                scorer_state=scorer.state_dict(),
                config=config,
            )
            row["dev_accuracy_pct"] = accuracy_pct(snapshot, dev_set, dev_cache)
            scorer.train()
            if tune:
                encoder.train()
        history.append(row)
        if config.log_every and epoch % config.log_every == 0:
            logger.info("cloze epoch %d: %s", epoch, row)

    scorer.eval()
    encoder.eval()
    return ClozeModel(
        encoder_id=config.encoder_id,
        scorer_state={k: v.detach().clone() for k, v in scorer.state_dict().items()},
        config=config,
        history=history,
        encoder_state=(
            {k: v.detach().clone() for k, v in encoder.state_dict().items()} if tune else None
        ),
    )


# --- evaluation and reports ---------------------------------------------

@dataclass(frozen=True)
class ReportRow:
    setting: str
    encoder: str
    n_instances: int
    accuracy_pct: float


def evaluate(
    model: ClozeModel,
    eval_set: list[ClozeInstance],
    setting: str,
    images_root: Path | str,
    *,
    encoder: PanelEncoder | None = None,
    batch_size: int = 32,
) -> ReportRow:
    """Accuracy of the model on instances whose images live under
    ``images_root`` (originals for N_T, a treatment's output tree otherwise)."""
    if setting not in EVAL_SETTINGS:
        raise ContractViolation(f"unknown evaluation setting {setting!r}")
    if not eval_set:
        raise ContractViolation("evaluation set is empty")
    if encoder is None:
        encoder = model.encoder()
    cache = EmbeddingCache(images_root, encoder, model.config.image_size)
    return ReportRow(
        setting=setting,
        encoder=model.encoder_id,
        n_instances=len(eval_set),
        accuracy_pct=accuracy_pct(model, eval_set, cache, batch_size),
    )


REPORT_FIELDS = ("setting", "encoder", "n_instances", "accuracy_pct")


def write_report(rows: list[ReportRow], path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {
                    "setting": row.setting,
                    "encoder": row.encoder,
                    "n_instances": row.n_instances,
                    "accuracy_pct": f"{row.accuracy_pct:.1f}",
                }
            )
    return path


def read_report(path: Path | str) -> list[ReportRow]:
    with open(path, newline="") as fh:
        return [
            ReportRow(
                setting=r["setting"],
                encoder=r["encoder"],
                n_instances=int(r["n_instances"]),
                accuracy_pct=float(r["accuracy_pct"]),
            )
            for r in csv.DictReader(fh)
        ]


# --- model persistence ---------------------------------------------------

def save_encoder_state(model: ClozeModel, encoder_dir: Path | str) -> Path | None:
    """Persist a fine-tuned encoder as {encoder_id}.pt for load_encoder."""
    if model.encoder_state is None:
        return None
    encoder_dir = Path(encoder_dir)
    encoder_dir.mkdir(parents=True, exist_ok=True)
    path = encoder_dir / f"{model.encoder_id}.pt"
    torch.save(model.encoder_state, path)
    return path


def save_cloze_model(model: ClozeModel, out_dir: Path | str) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.save(model.scorer_state, out_dir / "scorer.pt")
    if model.encoder_state is not None:
        torch.save(model.encoder_state, out_dir / "encoder.pt")
    meta = {
        "encoder_id": model.encoder_id,
        "training_config": model.config.to_dict(),
        "has_encoder_state": model.encoder_state is not None,
    }
    (out_dir / "config.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    with open(out_dir / "history.csv", "w", newline="") as fh:
        fields = sorted({k for row in model.history for k in row}) or ["epoch", "loss"]
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in model.history:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return out_dir


def load_cloze_model(model_dir: Path | str) -> ClozeModel:
    model_dir = Path(model_dir)
    scorer_path = model_dir / "scorer.pt"
    meta_path = model_dir / "config.json"
    if not scorer_path.exists() or not meta_path.exists():
        raise AssetMissingError(f"no cloze model checkpoint under {model_dir}")
    meta = json.loads(meta_path.read_text())
    encoder_state = None
    if meta.get("has_encoder_state") and (model_dir / "encoder.pt").exists():
        encoder_state = torch.load(model_dir / "encoder.pt", map_location="cpu", weights_only=True)
    history = []
    history_path = model_dir / "history.csv"
    if history_path.exists():
        with open(history_path, newline="") as fh:
            for row in csv.DictReader(fh):
                history.append(
                    {k: (int(v) if k == "epoch" else float(v)) for k, v in row.items() if v != ""}
                )
    return ClozeModel(
        encoder_id=meta["encoder_id"],
        scorer_state=torch.load(scorer_path, map_location="cpu", weights_only=True),
        config=ClozeTrainConfig.from_dict(meta["training_config"]),
        history=history,
        encoder_state=encoder_state,
    )
