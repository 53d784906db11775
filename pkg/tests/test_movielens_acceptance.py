"""
MovieLens-100K end-to-end runs with the default experiment settings.

Slow; skipped unless GEMRANK_DATA_DIR points at a directory holding u.data. Run with
`pytest -m movielens`.
"""

import pytest

from dataset import SplitConfig, index_dataset, read_ratings
from pco import Basis
from pipeline import PipelineSpec, Variant
from ranking_eval import evaluate

pytestmark = pytest.mark.movielens

REPETITIONS = 5


@pytest.fixture(scope="module")
def movielens(movielens_path):
    return index_dataset(read_ratings(movielens_path))


def _ndcg10(dataset, upl: int, **spec) -> float:
    report = evaluate(
        dataset,
        PipelineSpec(**spec),
        SplitConfig(upl=upl),
        repetitions=REPETITIONS,
        seed=0,
        threads=4,
    )
    return report.mean[10]


def test_index_sizes(movielens):
    assert movielens.num_users == 943
    assert movielens.num_items == 1682
    assert len(movielens.ratings) == 100_000


def test_item_based_reaches_target(movielens):
    assert _ndcg10(movielens, 50) >= 0.66


def test_mlp_beats_simple(movielens):
    mlp = _ndcg10(movielens, 50)
    simple = _ndcg10(movielens, 50, variant=Variant.GEMRANK_SIMPLE)
    assert mlp - simple >= 0.05


def test_item_basis_beats_user_basis(movielens):
    item = _ndcg10(movielens, 20)
    user = _ndcg10(movielens, 20, basis=Basis.USER)
    assert item - user >= 0.02


def test_repeat_runs_are_identical(movielens):
    spec = PipelineSpec(variant=Variant.GEMRANK_SIMPLE)
    first = evaluate(movielens, spec, SplitConfig(upl=10), repetitions=1, seed=5, threads=1)
    second = evaluate(movielens, spec, SplitConfig(upl=10), repetitions=1, seed=5, threads=4)
    assert first == second
