"""
Shared pytest fixtures for the GEMRank tests.

Provides:
- Synthetic rating logs (in memory and as u.data-style files)
- Small, fast pipeline configurations
- The MovieLens-100K file for the acceptance runs, skipped when absent
"""

from pathlib import Path

import numpy as np
import pytest

from dataset import Dataset, SplitConfig, TrainTestSplit, split_upl
from embedding import EmbeddingConfig
from mlp import MlpConfig
from pipeline import PipelineSpec

# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def make_dataset(
    rng: np.random.Generator,
    num_users: int,
    num_items: int,
    density: float = 0.3,
    r_max: int = 5,
) -> Dataset:
    """Random dataset where each (user, item) pair is rated with probability `density`."""
    mask = rng.random((num_users, num_items)) < density
    ratings = rng.integers(1, r_max + 1, size=(num_users, num_items))
    triples = [(int(u), int(i), int(ratings[u, i])) for u, i in zip(*np.nonzero(mask))]
    return Dataset.from_triples(num_users, num_items, triples, r_max=r_max)


def make_taste_log(
    rng: np.random.Generator,
    num_users: int = 40,
    num_items: int = 60,
    per_user: int = 30,
) -> list[str]:
    """
    u.data-style lines from two taste groups: each group rates its own half of the
    catalogue high and the other half low.
    """
    lines = []
    half = num_items // 2
    for user in range(num_users):
        group = user % 2
        items = rng.choice(num_items, size=per_user, replace=False)
        for item in items:
            liked = (item < half) == (group == 0)
            rating = int(rng.integers(4, 6)) if liked else int(rng.integers(1, 3))
            lines.append(f"{user + 1}\t{item + 1}\t{rating}\t{880000000 + len(lines)}")
    return lines


def write_log(path: Path, lines: list[str]) -> Path:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def fast_spec(**overrides) -> PipelineSpec:
    """Pipeline settings small enough for unit tests."""
    spec = PipelineSpec(
        embedding=EmbeddingConfig(dim=8, epochs=10, learning_rate=0.02, batch_size=64),
        mlp=MlpConfig(hidden_candidates=[4, 8], epochs=5, learning_rate=0.05, dropout_rate=0.2),
    )
    return spec.model_copy(update=overrides)


# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture()
def taste_lines() -> list[str]:
    return make_taste_log(np.random.default_rng(7))


@pytest.fixture()
def taste_file(tmp_path, taste_lines) -> Path:
    return write_log(tmp_path / "u.data", taste_lines)


@pytest.fixture()
def small_split(rng) -> TrainTestSplit:
    """Dense random log split with UPL=5 and at least 3 test ratings per user."""
    dataset = make_dataset(rng, num_users=12, num_items=20, density=0.6)
    return split_upl(dataset, SplitConfig(upl=5, min_test_items=3, seed=1))


@pytest.fixture(scope="session")
def movielens_path() -> Path:
    """MovieLens-100K u.data under GEMRANK_DATA_DIR; skips the test when absent."""
    import config

    if not config.GEMRANK_DATA_DIR:
        pytest.skip("GEMRANK_DATA_DIR is not set")
    path = Path(config.GEMRANK_DATA_DIR) / config.DEFAULT_RATINGS_FILE
    if not path.is_file():
        pytest.skip(f"MovieLens-100K not found at {path}")
    return path
