"""Tests for seed derivation, vector files, data path resolution and .env loading."""

import os
from unittest.mock import patch

import numpy as np
import pytest

import config
from errors import ArtifactError, ConfigError
from resource_utils import load_env_file, resolve_data_path
from utils import derive_seed, read_vectors, write_vectors


class TestDeriveSeed:
    def test_stable_and_in_range(self):
        assert derive_seed(0, "split/0") == derive_seed(0, "split/0")
        for stage in ("split/0", "embedding/0", "mlp/0"):
            assert 0 <= derive_seed(2**40, stage) < 2**32

    def test_stages_and_seeds_differ(self):
        stages = [f"{stage}/{r}" for stage in ("split", "mlp") for r in range(3)]
        seeds = {derive_seed(s, stage) for s in (0, 1) for stage in stages}
        assert len(seeds) == 12


class TestVectorFiles:
    def test_exact_round_trip(self, tmp_path, rng):
        vectors = rng.normal(size=(5, 3)) * 1e-7
        write_vectors(tmp_path / "v.txt", vectors)
        assert np.array_equal(read_vectors(tmp_path / "v.txt"), vectors)
        assert (tmp_path / "v.txt").read_text().splitlines()[0] == "5 3"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ArtifactError):
            read_vectors(tmp_path / "absent.txt")

    @pytest.mark.parametrize(
        "text",
        [
            "2\n0 1.0\n",
            "2 2\n0 1.0 2.0\n",
            "1 2\n0 1.0\n",
            "1 2\n3 1.0 2.0\n",
        ],
    )
    def test_malformed(self, tmp_path, text):
        (tmp_path / "v.txt").write_text(text)
        with pytest.raises(ArtifactError):
            read_vectors(tmp_path / "v.txt")


class TestResolveDataPath:
    def test_existing_path(self, tmp_path):
        path = tmp_path / "ratings.tsv"
        path.write_text("1\t1\t5\n")
        assert resolve_data_path(path) == path

    def test_falls_back_to_data_dir(self, tmp_path):
        (tmp_path / "u.data").write_text("1\t1\t5\n")
        with patch("config.GEMRANK_DATA_DIR", str(tmp_path)), patch(
            "config.DEFAULT_RATINGS_FILE", "u.data"
        ):
            assert resolve_data_path("") == tmp_path / "u.data"
            assert resolve_data_path("elsewhere/u.data") == tmp_path / "u.data"

    def test_nothing_configured(self):
        with patch("config.GEMRANK_DATA_DIR", ""):
            with pytest.raises(ConfigError, match="GEMRANK_DATA_DIR"):
                resolve_data_path(None)

    def test_missing_file(self, tmp_path):
        with patch("config.GEMRANK_DATA_DIR", str(tmp_path)):
            with pytest.raises(ConfigError, match="not found"):
                resolve_data_path("absent.data")


class TestLoadEnvFile:
    def test_settings_follow_loaded_file(self, tmp_path):
        env_file = tmp_path / ".env"
        env_file.write_text(
            f"GEMRANK_DATA_DIR={tmp_path}\nGEMRANK_LOG_TARGET=run.log\nGEMRANK_LOG_LEVEL=debug\n"
        )
        try:
            with patch.dict(os.environ), patch(
                "resource_utils.get_resource_path", return_value=env_file
            ):
                assert load_env_file() is True
                assert config.GEMRANK_DATA_DIR == str(tmp_path)
                assert config.GEMRANK_LOG_TARGET == "run.log"
                assert config.GEMRANK_LOG_LEVEL == "DEBUG"
        finally:
            config.read_environment()
