"""Command-line entry point for the whole pipeline.

Stages: ingest annotated titles, rasterize masks, train style models,
run channel-wise transfer, recompose pages, and run the story-cloze
evaluation, ending with the settings-by-encoders report. Every command
resolves one RunConfig (defaults < file < --set < flags) and writes a
snapshot of it beside its outputs.

Exit codes: 0 ok, 2 config error, 3 missing asset, 4 contract
violation, 5 training divergence.
"""

from __future__ import annotations

import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from .errors import AssetMissingError, ConfigError, ContractViolation, TrainingDivergence

logger = logging.getLogger("panelstyle")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ASSET = 3
EXIT_CONTRACT = 4
EXIT_DIVERGENCE = 5

_EXIT_BY_ERROR = (
    (ConfigError, EXIT_CONFIG),
    ((AssetMissingError, FileNotFoundError), EXIT_ASSET),
    (TrainingDivergence, EXIT_DIVERGENCE),
    (ContractViolation, EXIT_CONTRACT),
)


def _run(body):
    try:
        body()
    except click.ClickException:
        raise
    except Exception as e:  # noqa: BLE001 - mapped to documented exit codes
        for types, code in _EXIT_BY_ERROR:
            if isinstance(e, types):
                click.echo(f"error: {e}", err=True)
                sys.exit(code)
        raise
    sys.exit(EXIT_OK)


def _config(ctx):
    from .config import load_run_config

    params = ctx.obj
    config = load_run_config(params["config_path"], params["overrides"])
    if params["jobs"] is not None:
        config = config.with_overrides([f"jobs={params['jobs']}"])
    return config


def _jobs(config) -> int:
    configured = config.get("jobs")
    return configured if configured else (os.cpu_count() or 1)


def _load_corpus(config, key="paths.corpus"):
    from .corpus import load_corpus

    manifest = config.path(key) / "corpus.json"
    if not manifest.exists():
        raise AssetMissingError(f"no ingested corpus at {manifest} (run `ingest` first)")
    return load_corpus(manifest)


def _load_catalog(config):
    from .style_select import load_catalog

    index = config.path("paths.catalog") / "catalog.json"
    if not index.exists():
        raise AssetMissingError(f"no exemplar catalog at {index} (run `train-style` first)")
    return load_catalog(index)


def _load_templates(config):
    from .layout import load_template_library

    path = config.path("paths.templates")
    if path is None:
        return None
    if not path.exists():
        raise AssetMissingError(f"template library not found: {path}")
    return load_template_library(path)


def _style_train_config(config):
    from .stylenet.losses import LayerSelection, LossWeights
    from .stylenet.train import StyleTrainConfig

    net = config.get("stylenet")
    try:
        weights = LossWeights(**net["weights"])
        layers = LayerSelection(
            content_layers=tuple(net["content_layers"]),
            style_layers=tuple(net["style_layers"]),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad stylenet settings: {e}") from e
    return StyleTrainConfig(
        seed=config.get("seed"),
        iterations=net["iterations"],
        learning_rate=net["learning_rate"],
        image_size=net["image_size"],
        weights=weights,
        layers=layers,
        residual_blocks=net["residual_blocks"],
        base_channels=net["base_channels"],
        loss_network_weights=net["loss_network_weights"],
        log_every=net["log_every"],
    )


def _cloze_train_config(config, encoder_id=None, fine_tune=None):
    from .cloze import ClozeTrainConfig

    section = config.get("cloze")
    encoder_id = section["encoder"] if encoder_id is None else encoder_id
    fine_tune = section["fine_tune"] if fine_tune is None else fine_tune
    return ClozeTrainConfig(
        seed=config.get("seed"),
        epochs=section["epochs"],
        learning_rate=section["learning_rate"],
        batch_size=section["batch_size"],
        image_size=section["image_size"],
        encoder_id=encoder_id,
        fine_tune_encoder=fine_tune,
        encoder_learning_rate=section["encoder_learning_rate"],
    )


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option(
    "--config", "config_path", type=click.Path(path_type=Path), default=None,
    help="YAML config file (or a config.snapshot.yaml from an earlier run).",
)
@click.option(
    "--set", "overrides", multiple=True, metavar="SECTION.KEY=VALUE",
    help="Override one config value; repeatable.",
)
@click.option("--jobs", type=int, default=None, help="Worker threads (default: logical cores).")
@click.option("-v", "--verbose", is_flag=True, help="Debug-level logging.")
@click.pass_context
def main(ctx, config_path, overrides, jobs, verbose):
    """Channel-wise style transfer for comics with narrative evaluation."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )
    ctx.obj = {"config_path": config_path, "overrides": overrides, "jobs": jobs}


@main.command()
@click.option(
    "--annotations", "-a", "annotation_files", multiple=True, required=True,
    type=click.Path(path_type=Path), help="Title annotation JSON; repeatable.",
)
@click.option(
    "--images", "-i", "image_dirs", multiple=True, required=True,
    type=click.Path(path_type=Path), help="Page image directory, one per --annotations.",
)
@click.option(
    "--into", type=click.Choice(["corpus", "style_corpus"]), default="corpus",
    help="Which configured corpus directory receives the titles.",
)
@click.pass_context
def ingest(ctx, annotation_files, image_dirs, into):
    """Ingest annotated titles into a working corpus."""

    def body():
        from .config import write_snapshot
        from .corpus import ingest_title, save_corpus

        config = _config(ctx)
        if len(annotation_files) != len(image_dirs):
            raise ConfigError("need exactly one --images per --annotations")
        pages = []
        for ann, imgs in zip(annotation_files, image_dirs):
            if not Path(ann).exists():
                raise AssetMissingError(f"annotation file not found: {ann}")
            if not Path(imgs).is_dir():
                raise AssetMissingError(f"image directory not found: {imgs}")
            pages.extend(ingest_title(ann, imgs))
        out_dir = config.path(f"paths.{into}")
        manifest = save_corpus(pages, out_dir)
        write_snapshot(
            config, out_dir, "ingest",
            {
                "annotations": [str(a) for a in annotation_files],
                "images": [str(i) for i in image_dirs],
                "into": into,
            },
        )
        click.echo(f"ingested {len(pages)} pages -> {manifest}")

    _run(body)


@main.command()
@click.option("--variant", type=click.Choice(["rect", "fit"]), default=None,
              help="Mask geometry (default: masks.variant from config).")
@click.pass_context
def mask(ctx, variant):
    """Rasterize the three-channel mask partition for every panel."""

    def body():
        from .config import write_snapshot
        from .masking import build_mask_set, save_mask_set

        config = _config(ctx)
        chosen = variant or config.get("masks.variant")
        pages = _load_corpus(config)
        out_dir = config.path("paths.corpus") / "masks"
        n = 0
        for page in pages:
            for panel in page.panels:
                masks = build_mask_set(panel, chosen)
                save_mask_set(masks, out_dir / page.page_id)
                n += 1
        write_snapshot(config, out_dir, "mask", {"variant": chosen})
        click.echo(f"wrote {chosen} masks for {n} panels -> {out_dir}")

    _run(body)


@main.command("train-style")
@click.option("--force", is_flag=True, help="Retrain models that already exist.")
@click.pass_context
def train_style(ctx, force):
    """Build the exemplar catalog and train per-channel style models."""

    def body():
        from .config import write_snapshot
        from .masking import apply_mask
        from .style_select import build_exemplar, save_catalog
        from .stylenet.train import ModelStore, train_style_model

        config = _config(ctx)
        variant = config.get("masks.variant")
        style_pages = _load_corpus(config, "paths.style_corpus")
        exemplars = [
            build_exemplar(panel.panel_id, page.book_id, panel, variant)
            for page in style_pages
            for panel in page.panels
        ]
        if not exemplars:
            raise ContractViolation("style corpus has no panels")
        catalog_index = save_catalog(exemplars, config.path("paths.catalog"))

        content_pages = _load_corpus(config)
        content_images = [
            panel.image
            for page in content_pages
            for panel in sorted(page.panels, key=lambda p: p.reading_index)
        ][: config.get("stylenet.max_content_images")]

        store = ModelStore(config.path("paths.model_store"))
        train_config = _style_train_config(config)
        channels = config.get("stylenet.channels")
        trained = skipped = 0
        for ex in exemplars:
            for channel in channels:
                if store.exists(ex.exemplar_id, channel) and not force:
                    skipped += 1
                    continue
                if channel == "whole":
                    style_image = ex.image
                else:
                    style_image = apply_mask(ex.image, ex.mask_set.mask(channel))
                model = train_style_model(
                    style_image,
                    content_images,
                    train_config,
                    channel=channel,
                    style_exemplar_id=ex.exemplar_id,
                )
                store.save(model)
                trained += 1
        write_snapshot(config, store.root, "train-style", {"force": force})
        click.echo(
            f"catalog {catalog_index} ({len(exemplars)} exemplars); "
            f"trained {trained} models, reused {skipped} -> {store.root}"
        )

    _run(body)


def _existing_outputs(out_root, treatment, page, force):
    from .corpus import load_image
    from .transfer import panel_output_path

    if force:
        return {}
    existing = {}
    for panel in page.panels:
        path = panel_output_path(out_root, treatment, page.page_id, panel.panel_id)
        if path.exists():
            existing[panel.panel_id] = load_image(path)
    return existing


@main.command()
@click.option("--treatment", "treatment_str", default=None,
              help='Treatment tag, e.g. "CP,R_M" or "CP,F_M,C".')
@click.option("--setting", "setting_name", default=None,
              type=click.Choice(["T_W", "T_M", "T_C"]),
              help="Evaluation setting shorthand for a standard treatment.")
@click.option("--force", is_flag=True, help="Redo panels whose outputs already exist.")
@click.pass_context
def transfer(ctx, treatment_str, setting_name, force):
    """Run channel-wise style transfer over the whole corpus."""

    def body():
        from .config import write_snapshot
        from .stylenet.train import ModelStore
        from .transfer import SETTING_TREATMENTS, Treatment, run_page, write_page_outputs

        config = _config(ctx)
        if treatment_str and setting_name:
            raise ConfigError("give either --treatment or --setting, not both")
        if setting_name:
            treatment = SETTING_TREATMENTS[setting_name]
        else:
            treatment = Treatment.parse(treatment_str or config.get("treatment"))
        pages = _load_corpus(config)
        catalog = _load_catalog(config)
        templates = _load_templates(config)
        store = ModelStore(config.path("paths.model_store"))
        out_root = config.path("paths.output_root")
        section = config.get("transfer")

        def one(page):
            existing = _existing_outputs(out_root, treatment, page, force)
            result = run_page(
                page, treatment, catalog, store, templates,
                page_width_px=section["page_width_px"],
                page_aspect=section["page_aspect"],
                layout_seed=section["layout_seed"],
                feather_radius=section["feather"],
                existing=existing,
            )
            return result

        jobs = _jobs(config)
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(one, pages))
        else:
            results = [one(page) for page in pages]
        cached = 0
        for result in results:  # deterministic write order regardless of pool
            write_page_outputs(result, out_root)
            cached += sum(job.cached for job in result.jobs)
        total = sum(len(r.jobs) for r in results)
        write_snapshot(
            config, out_root / treatment.tag, "transfer",
            {"treatment": treatment.tag, "force": force},
        )
        click.echo(
            f"treatment {treatment.tag}: {total} panels "
            f"({cached} reused) over {len(results)} pages -> {out_root / treatment.tag}"
        )

    _run(body)


@main.command()
@click.option("--source", default="originals",
              help='"originals" or a treatment tag whose panel outputs to recompose.')
@click.pass_context
def compose(ctx, source):
    """Recompose panels into pages using the layout templates."""

    def body():
        from .config import write_snapshot
        from .corpus import load_image
        from .layout import compose_page, pick_template, save_composed_page
        from .transfer import Treatment, panel_output_path

        config = _config(ctx)
        pages = _load_corpus(config)
        templates = _load_templates(config)
        if templates is None:
            raise ConfigError("compose needs paths.templates to be configured")
        treatment = None if source == "originals" else Treatment.parse(source)
        section = config.get("transfer")
        out_root = config.path("paths.output_root")
        out_dir = out_root / source
        for page in pages:
            panels = []
            for panel in sorted(page.panels, key=lambda p: p.reading_index):
                if treatment is None:
                    raster = panel.image
                else:
                    path = panel_output_path(
                        out_root, treatment, page.page_id, panel.panel_id
                    )
                    if not path.exists():
                        raise AssetMissingError(
                            f"no transferred panel at {path}; run `transfer` first"
                        )
                    raster = load_image(path)
                panels.append((panel.panel_id, raster))
            template = pick_template(
                len(panels), templates, seed=section["layout_seed"]
            )
            composed = compose_page(
                panels, template,
                page_width_px=section["page_width_px"],
                page_aspect=section["page_aspect"],
            )
            save_composed_page(composed, out_dir / page.page_id / "composed.png")
        write_snapshot(config, out_dir, "compose", {"source": source})
        click.echo(f"composed {len(pages)} pages -> {out_dir}")

    _run(body)


@main.group()
def cloze():
    """Visual story-cloze: build instances, train, evaluate."""


@cloze.command("build")
@click.pass_context
def cloze_build(ctx):
    """Build the cloze instance set and its train/dev split."""

    def body():
        from .cloze import build_cloze_set, save_cloze_set, split_instances
        from .config import write_snapshot

        config = _config(ctx)
        pages = _load_corpus(config)
        section = config.get("cloze")
        instances = build_cloze_set(pages, section["n_context"], seed=config.get("seed"))
        if not instances:
            raise ContractViolation("corpus yields no cloze instances")
        train_set, dev_set = split_instances(
            instances, section["dev_fraction"], seed=config.get("seed")
        )
        cloze_dir = config.path("paths.cloze_dir")
        save_cloze_set(instances, cloze_dir / "instances.json", section["n_context"])
        save_cloze_set(train_set, cloze_dir / "train.json", section["n_context"])
        save_cloze_set(dev_set, cloze_dir / "dev.json", section["n_context"])
        write_snapshot(config, cloze_dir, "cloze build")
        click.echo(
            f"{len(instances)} instances ({len(train_set)} train / {len(dev_set)} dev) "
            f"-> {cloze_dir}"
        )

    _run(body)


@cloze.command("train")
@click.option("--encoder", "encoder_id", default=None,
              type=click.Choice(["feature_C", "feature_M", "frozen"]),
              help="Encoder variant (default: cloze.encoder from config).")
@click.option("--fine-tune/--no-fine-tune", "fine_tune", default=None,
              help="Jointly fine-tune the panel encoder.")
@click.pass_context
def cloze_train(ctx, encoder_id, fine_tune):
    """Train the cloze comprehension model."""

    def body():
        from .cloze import (
            load_cloze_set,
            save_cloze_model,
            save_encoder_state,
            train_cloze_model,
        )
        from .config import write_snapshot

        config = _config(ctx)
        cloze_dir = config.path("paths.cloze_dir")
        train_path = cloze_dir / "train.json"
        if not train_path.exists():
            raise AssetMissingError(f"no cloze split at {train_path} (run `cloze build`)")
        train_set = load_cloze_set(train_path)
        dev_set = load_cloze_set(cloze_dir / "dev.json")
        train_config = _cloze_train_config(config, encoder_id, fine_tune)
        images_root = config.path("paths.corpus") / "crops"
        model = train_cloze_model(train_set, images_root, train_config, dev_set=dev_set)
        model_dir = cloze_dir / "models" / train_config.encoder_id
        save_cloze_model(model, model_dir)
        save_encoder_state(model, cloze_dir / "encoders")
        write_snapshot(
            config, model_dir, "cloze train",
            {"encoder": train_config.encoder_id, "fine_tune": train_config.fine_tune_encoder},
        )
        last = model.history[-1] if model.history else {}
        click.echo(
            f"trained {train_config.encoder_id} cloze model "
            f"(final {last}) -> {model_dir}"
        )

    _run(body)


@cloze.command("eval")
@click.option("--setting", "setting_name", required=True,
              type=click.Choice(["N_T", "T_W", "T_M", "T_C"]))
@click.option("--encoder", "encoder_id", default=None,
              type=click.Choice(["feature_C", "feature_M", "frozen"]),
              help="Which trained cloze model to evaluate.")
@click.option("--instances", "instances_path", type=click.Path(path_type=Path),
              default=None, help="Instance manifest (default: the full built set).")
@click.pass_context
def cloze_eval(ctx, setting_name, encoder_id, instances_path):
    """Score one evaluation setting and write its report row."""

    def body():
        from .cloze import evaluate, load_cloze_model, load_cloze_set, write_report
        from .config import write_snapshot
        from .transfer import SETTING_TREATMENTS

        config = _config(ctx)
        cloze_dir = config.path("paths.cloze_dir")
        encoder = encoder_id or config.get("cloze.encoder")
        model = load_cloze_model(cloze_dir / "models" / encoder)
        manifest = instances_path or (cloze_dir / "instances.json")
        if not Path(manifest).exists():
            raise AssetMissingError(f"no instance manifest at {manifest} (run `cloze build`)")
        eval_set = load_cloze_set(manifest)
        treatment = SETTING_TREATMENTS[setting_name]
        if treatment is None:
            images_root = config.path("paths.corpus") / "crops"
        else:
            images_root = config.path("paths.output_root") / treatment.tag
            if not images_root.exists():
                raise AssetMissingError(
                    f"no transfer outputs for {setting_name} at {images_root}"
                )
        row = evaluate(model, eval_set, setting_name, images_root)
        out = cloze_dir / "eval" / f"{setting_name}.{encoder}.csv"
        write_report([row], out)
        write_snapshot(
            config, cloze_dir / "eval", "cloze eval",
            {"setting": setting_name, "encoder": encoder},
        )
        click.echo(
            f"{row.setting} / {row.encoder}: {row.accuracy_pct:.1f}% "
            f"over {row.n_instances} instances -> {out}"
        )

    _run(body)


REPORT_SETTINGS = ("N_T", "T_W", "T_M", "T_C")
REPORT_ENCODERS = ("feature_C", "feature_M")


@main.command()
@click.pass_context
def report(ctx):
    """Collect all eval rows into the settings-by-encoders grid CSV."""

    def body():
        from .cloze import read_report, write_report
        from .config import write_snapshot

        config = _config(ctx)
        eval_dir = config.path("paths.cloze_dir") / "eval"
        rows = []
        missing = []
        for setting in REPORT_SETTINGS:
            for encoder in REPORT_ENCODERS:
                path = eval_dir / f"{setting}.{encoder}.csv"
                if not path.exists():
                    missing.append(f"{setting}/{encoder}")
                    continue
                rows.extend(read_report(path))
        if missing:
            raise AssetMissingError(
                "report needs every grid cell evaluated; missing: " + ", ".join(missing)
            )
        out_root = config.path("paths.output_root")
        out = write_report(rows, out_root / "report.csv")
        write_snapshot(config, out_root, "report")
        click.echo(f"{len(rows)} rows -> {out}")
        for row in rows:
            click.echo(
                f"  {row.setting:4s} {row.encoder:10s} "
                f"{row.accuracy_pct:6.1f}%  (n={row.n_instances})"
            )

    _run(body)


if __name__ == "__main__":
    main()
