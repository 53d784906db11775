"""Tests for the run configuration file, overrides and the effective-config echo."""

from pathlib import Path

import pytest

from errors import ConfigError
from pco import Basis
from pipeline import Variant
from run_config import build_run_config, flatten, load_config_file, write_effective_config


def _write(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "gemrank.conf"
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadConfigFile:
    def test_sections_and_comments(self, tmp_path):
        path = _write(
            tmp_path,
            "# experiment\nbasis = user\nsplit.upl = 20\nembedding.dim = 16\n"
            "mlp.hidden_candidates = 5,10\n",
        )
        run = build_run_config(load_config_file(path))
        assert run.basis == Basis.USER
        assert run.split.upl == 20
        assert run.embedding.dim == 16
        assert run.mlp.hidden_candidates == [5, 10]

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config_file(tmp_path / "absent.conf")

    def test_key_without_value(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config_file(_write(tmp_path, "seed\n"))


class TestBuildRunConfig:
    def test_defaults(self):
        run = build_run_config()
        assert run.basis == Basis.ITEM
        assert run.variant == Variant.GEMRANK_MLP
        assert run.split.upl == 50
        assert run.embedding.dim == 100
        assert run.mlp.hidden_candidates == [5, 10, 15, 20, 25]
        assert run.eval.n_values == [5, 10]
        assert run.data.delimiter == "\t"

    def test_override_beats_file(self):
        run = build_run_config({"seed": "1", "split.upl": "10"}, {"seed": 7, "split.upl": None})
        assert run.seed == 7
        assert run.split.upl == 10

    @pytest.mark.parametrize("key", ["nonsense", "split.nonsense", "network.dim"])
    def test_unknown_key(self, key):
        with pytest.raises(ConfigError, match="Unknown config key"):
            build_run_config({key: "1"})

    @pytest.mark.parametrize(
        "key, value",
        [
            ("split.upl", "0"),
            ("embedding.dim", "many"),
            ("mlp.dropout_rate", "1.5"),
            ("basis", "movie"),
            ("threads", "0"),
            ("eval.n_values", "0"),
            ("pco.log_base", "10"),
        ],
    )
    def test_invalid_value(self, key, value):
        with pytest.raises(ConfigError):
            build_run_config({key: value})

    def test_named_delimiter(self):
        assert build_run_config({"data.delimiter": "comma"}).data.delimiter == ","

    def test_pipeline_spec_carries_stage_settings(self):
        run = build_run_config({"variant": "gemrank-simple", "embedding.dim": "4"})
        spec = run.pipeline_spec()
        assert spec.variant == Variant.GEMRANK_SIMPLE
        assert spec.embedding.dim == 4


class TestEffectiveConfig:
    def test_sorted_and_reloadable(self, tmp_path):
        run = build_run_config(
            {"basis": "user", "mlp.hidden_candidates": "3,6", "out_dir": str(tmp_path)}
        )
        path = write_effective_config(run)
        assert path == tmp_path / "config.effective"
        keys = [line.split(" = ")[0] for line in path.read_text().splitlines()]
        assert keys == sorted(keys)
        assert "data.delimiter = tab" in path.read_text().splitlines()

        reloaded = build_run_config(load_config_file(path))
        assert reloaded == run

    def test_flatten_covers_every_section(self):
        flat = flatten(build_run_config())
        for prefix in ("data.", "split.", "pco.", "embedding.", "profiles.", "mlp.", "eval."):
            assert any(key.startswith(prefix) for key in flat)
        assert flat["variant"] == "gemrank-mlp"
