"""End-to-end tests of the command-line interface and its exit codes."""

import hashlib
import json

import pytest
import yaml
from click.testing import CliRunner

from panelstyle.cli import (
    EXIT_ASSET,
    EXIT_CONFIG,
    EXIT_CONTRACT,
    EXIT_DIVERGENCE,
    EXIT_OK,
    main,
)
from panelstyle.cloze import ReportRow, write_report
from panelstyle.config import SNAPSHOT_NAME, load_run_config

from fixtures import write_template_library, write_title

CONFIG_DOC = {
    "seed": 0,
    "paths": {
        "corpus": "work/corpus",
        "style_corpus": "work/style",
        "catalog": "work/catalog",
        "templates": "templates.json",
        "model_store": "work/models",
        "cloze_dir": "work/cloze",
        "output_root": "work/out",
    },
    "stylenet": {
        "iterations": 3,
        "image_size": 32,
        "residual_blocks": 1,
        "base_channels": 8,
        "max_content_images": 2,
        "log_every": 0,
    },
    "cloze": {
        "epochs": 2,
        "image_size": 32,
        "batch_size": 8,
        "dev_fraction": 0.34,
    },
}


def invoke(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


def ok(*args):
    result = invoke(*args)
    assert result.exit_code == EXIT_OK, result.output
    return result


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One fully-run pipeline workspace shared by the read-only tests."""
    ws = tmp_path_factory.mktemp("cli_ws")
    write_title(ws / "content_raw", title="story", rows=2, cols=3, n_pages=3, seed=1)
    write_title(ws / "style_raw", title="styles", rows=2, cols=2, n_pages=1, seed=9)
    write_template_library(ws)
    config = ws / "config.yaml"
    config.write_text(yaml.safe_dump(CONFIG_DOC))

    ok("--config", config, "ingest",
       "-a", ws / "content_raw" / "story.json", "-i", ws / "content_raw" / "images")
    ok("--config", config, "ingest", "--into", "style_corpus",
       "-a", ws / "style_raw" / "styles.json", "-i", ws / "style_raw" / "images")
    ok("--config", config, "mask")
    ok("--config", config, "train-style")
    ok("--config", config, "transfer", "--setting", "T_M")
    ok("--config", config, "cloze", "build")
    ok("--config", config, "cloze", "train", "--encoder", "frozen")
    return ws


@pytest.fixture(scope="module")
def config_file(workspace):
    return workspace / "config.yaml"


class TestIngest:
    def test_corpus_tree(self, workspace):
        corpus = workspace / "work" / "corpus"
        assert (corpus / "corpus.json").exists()
        assert (corpus / SNAPSHOT_NAME).exists()
        crops = sorted(p.name for p in (corpus / "crops" / "story_pg000").iterdir())
        assert crops == [f"story_pg000.p{i}.png" for i in range(6)]

    def test_snapshot_records_command(self, workspace):
        doc = yaml.safe_load((workspace / "work" / "corpus" / SNAPSHOT_NAME).read_text())
        assert doc["command"] == "ingest"
        assert doc["args"]["into"] == "corpus"
        assert doc["config"]["seed"] == 0

    def test_mismatched_pairs_is_config_error(self, workspace, config_file):
        result = invoke("--config", config_file, "ingest",
                        "-a", workspace / "content_raw" / "story.json")
        assert result.exit_code == EXIT_CONFIG

    def test_missing_annotation_is_asset_error(self, workspace, config_file):
        result = invoke("--config", config_file, "ingest",
                        "-a", workspace / "nope.json",
                        "-i", workspace / "content_raw" / "images")
        assert result.exit_code == EXIT_ASSET

    def test_malformed_annotation_is_config_error(self, tmp_path, config_file, workspace):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"title": "x"}))  # no pages
        result = invoke("--config", config_file, "ingest",
                        "-a", bad, "-i", workspace / "content_raw" / "images")
        assert result.exit_code == EXIT_CONFIG


class TestMask:
    def test_masks_written(self, workspace):
        mask_dir = workspace / "work" / "corpus" / "masks"
        files = list(mask_dir.rglob("*.rect.*.png"))
        # 18 panels x 3 channels
        assert len(files) == 54

    def test_variant_flag_overrides_config(self, workspace, config_file):
        ok("--config", config_file, "mask", "--variant", "fit")
        mask_dir = workspace / "work" / "corpus" / "masks"
        assert len(list(mask_dir.rglob("*.fit.*.png"))) == 54


class TestTrainStyle:
    def test_catalog_and_models(self, workspace):
        assert (workspace / "work" / "catalog" / "catalog.json").exists()
        store = workspace / "work" / "models"
        weights = list(store.rglob("weights.pt"))
        # 4 exemplars x 4 channels
        assert len(weights) == 16
        assert (store / SNAPSHOT_NAME).exists()

    def test_rerun_reuses_models(self, config_file):
        result = ok("--config", config_file, "train-style")
        assert "reused 16" in result.output


class TestTransfer:
    def test_output_tree(self, workspace):
        out = workspace / "work" / "out" / "CP,R_M"
        for pg in ("story_pg000", "story_pg001", "story_pg002"):
            assert (out / pg / "composed.png").exists()
            assert (out / pg / "trace.json").exists()
            assert len(list((out / pg).glob(f"{pg}.p*.png"))) == 6
        assert (out / SNAPSHOT_NAME).exists()

    def test_restart_reuses_existing(self, config_file):
        result = ok("--config", config_file, "transfer", "--setting", "T_M")
        assert "18 reused" in result.output

    def test_force_redoes_everything(self, config_file):
        result = ok("--config", config_file, "transfer", "--setting", "T_M", "--force")
        assert "0 reused" in result.output

    def test_treatment_and_setting_conflict(self, config_file):
        result = invoke("--config", config_file, "transfer",
                        "--treatment", "CP,R_M", "--setting", "T_M")
        assert result.exit_code == EXIT_CONFIG

    def test_missing_models_is_asset_error(self, config_file, tmp_path):
        result = invoke("--config", config_file,
                        "--set", f"paths.model_store={tmp_path / 'void'}",
                        "--set", f"paths.output_root={tmp_path / 'out'}",
                        "transfer", "--treatment", "CP,R_M")
        assert result.exit_code == EXIT_ASSET

    def test_snapshot_rerun_is_byte_identical(self, workspace, config_file):
        out = workspace / "work" / "out" / "CP,R_M"
        snapshot = out / SNAPSHOT_NAME

        def digests():
            return {
                str(p.relative_to(out)): hashlib.md5(p.read_bytes()).hexdigest()
                for p in sorted(out.rglob("*.png"))
            }

        def traces():
            docs = {}
            for p in sorted(out.rglob("trace.json")):
                doc = json.loads(p.read_text())
                doc.pop("timings", None)
                docs[str(p.relative_to(out))] = doc
            return docs

        before, before_traces = digests(), traces()
        ok("--config", snapshot, "transfer", "--force")
        assert digests() == before
        assert traces() == before_traces


class TestCompose:
    def test_originals(self, workspace, config_file):
        ok("--config", config_file, "compose", "--source", "originals")
        out = workspace / "work" / "out" / "originals"
        assert len(list(out.rglob("composed.png"))) == 3

    def test_from_treatment_outputs(self, workspace, config_file):
        ok("--config", config_file, "compose", "--source", "CP,R_M")
        assert (workspace / "work" / "out" / "CP,R_M" / "story_pg000" / "composed.png").exists()

    def test_missing_treatment_outputs(self, config_file):
        result = invoke("--config", config_file, "compose", "--source", "AS,N_M")
        assert result.exit_code == EXIT_ASSET


class TestCloze:
    def test_build_manifests(self, workspace):
        cloze_dir = workspace / "work" / "cloze"
        for name in ("instances.json", "train.json", "dev.json"):
            assert (cloze_dir / name).exists()
        instances = json.loads((cloze_dir / "instances.json").read_text())["instances"]
        # middle page of a 3-page book has no distant distractor pages
        assert {i["page_id"] for i in instances} == {"story_pg000", "story_pg002"}

    def test_train_artifacts(self, workspace):
        model_dir = workspace / "work" / "cloze" / "models" / "frozen"
        assert (model_dir / "scorer.pt").exists()
        assert (model_dir / "config.json").exists()
        assert (model_dir / SNAPSHOT_NAME).exists()

    def test_eval_writes_row(self, workspace, config_file):
        result = ok("--config", config_file, "cloze", "eval",
                    "--setting", "N_T", "--encoder", "frozen")
        path = workspace / "work" / "cloze" / "eval" / "N_T.frozen.csv"
        assert path.exists()
        header, row = path.read_text().strip().splitlines()
        assert header == "setting,encoder,n_instances,accuracy_pct"
        assert row.startswith("N_T,frozen,")
        assert "N_T / frozen" in result.output

    def test_eval_treated_setting(self, workspace, config_file):
        ok("--config", config_file, "cloze", "eval",
           "--setting", "T_M", "--encoder", "frozen")
        assert (workspace / "work" / "cloze" / "eval" / "T_M.frozen.csv").exists()

    def test_eval_without_transfer_outputs(self, config_file):
        result = invoke("--config", config_file, "cloze", "eval",
                        "--setting", "T_C", "--encoder", "frozen")
        assert result.exit_code == EXIT_ASSET

    def test_eval_without_model(self, config_file, tmp_path):
        result = invoke("--config", config_file,
                        "--set", f"paths.cloze_dir={tmp_path / 'void'}",
                        "cloze", "eval", "--setting", "N_T", "--encoder", "frozen")
        assert result.exit_code == EXIT_ASSET

    def test_divergence_exit_code(self, config_file, tmp_path):
        result = invoke("--config", config_file,
                        "--set", "cloze.learning_rate=1e36",
                        "--set", "cloze.epochs=4",
                        "--set", f"paths.cloze_dir={tmp_path / 'cloze2'}",
                        "cloze", "build")
        assert result.exit_code == EXIT_OK
        result = invoke("--config", config_file,
                        "--set", "cloze.learning_rate=1e36",
                        "--set", "cloze.epochs=4",
                        "--set", f"paths.cloze_dir={tmp_path / 'cloze2'}",
                        "cloze", "train", "--encoder", "frozen")
        assert result.exit_code == EXIT_DIVERGENCE

    def test_build_without_instances_is_contract_violation(self, tmp_path):
        write_title(tmp_path / "raw", title="solo", rows=2, cols=2, n_pages=1)
        config = tmp_path / "config.yaml"
        config.write_text(yaml.safe_dump({"paths": {"corpus": "work/corpus"}}))
        ok("--config", config, "ingest",
           "-a", tmp_path / "raw" / "solo.json", "-i", tmp_path / "raw" / "images")
        result = invoke("--config", config, "cloze", "build")
        assert result.exit_code == EXIT_CONTRACT


class TestReport:
    def test_missing_cells_is_asset_error(self, config_file, tmp_path):
        result = invoke("--config", config_file,
                        "--set", f"paths.cloze_dir={tmp_path / 'void'}",
                        "report")
        assert result.exit_code == EXIT_ASSET
        assert "missing" in result.output

    def test_full_grid(self, workspace, config_file):
        eval_dir = workspace / "work" / "cloze" / "eval"
        for setting in ("N_T", "T_W", "T_M", "T_C"):
            for encoder in ("feature_C", "feature_M"):
                write_report(
                    [ReportRow(setting, encoder, 6, 50.0)],
                    eval_dir / f"{setting}.{encoder}.csv",
                )
        result = ok("--config", config_file, "report")
        report_path = workspace / "work" / "out" / "report.csv"
        lines = report_path.read_text().strip().splitlines()
        assert len(lines) == 1 + 8
        assert "8 rows" in result.output


class TestConfigHandling:
    def test_help_exits_zero(self):
        assert invoke("--help").exit_code == EXIT_OK

    def test_unknown_flag_is_usage_error(self, config_file):
        assert invoke("--config", config_file, "mask", "--bogus").exit_code == EXIT_CONFIG

    def test_missing_config_file(self):
        assert invoke("--config", "absent.yaml", "mask").exit_code == EXIT_CONFIG

    def test_unknown_override_key(self, config_file):
        result = invoke("--config", config_file, "--set", "nope.key=1", "mask")
        assert result.exit_code == EXIT_CONFIG

    def test_bad_config_value(self, tmp_path):
        config = tmp_path / "c.yaml"
        config.write_text(yaml.safe_dump({"masks": {"variant": "oval"}}))
        assert invoke("--config", config, "mask").exit_code == EXIT_CONFIG

    def test_flag_beats_set_override(self, workspace, config_file):
        # Dedicated flags are the outermost layer of precedence.
        ok("--config", config_file, "--set", "masks.variant=fit",
           "mask", "--variant", "rect")
        doc = yaml.safe_load(
            (workspace / "work" / "corpus" / "masks" / SNAPSHOT_NAME).read_text()
        )
        assert doc["args"]["variant"] == "rect"

    def test_load_run_config_roundtrips_snapshot(self, workspace):
        snapshot = workspace / "work" / "out" / "CP,R_M" / SNAPSHOT_NAME
        config = load_run_config(snapshot)
        assert config.get("stylenet.iterations") == 3
        assert config.path("paths.corpus").is_absolute()
