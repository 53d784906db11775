"""
Per-user rankings (MLP-scored or cosine nearest-neighbor) and NDCG evaluation over
held-out test ratings.
"""

import logging
from collections.abc import Callable, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel, model_validator

from config import NDCG_CUTOFFS, REFERENCE_NDCG_ML100K, REPORT_DATA_FILE, REPORT_TABLE_FILE
from dataset import Dataset, SplitConfig, TrainTestSplit, split_upl
from mlp import MlpModel, predict_logits, squash
from pipeline import FittedPipeline, PipelineSpec, fit_pipeline, seeded_spec
from utils import derive_seed

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Ranking:
    user_index: int
    entries: list[tuple[int, float]]

    @property
    def items(self) -> list[int]:
        return [item for item, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def _candidate_arrays(item_vectors: Mapping[int, np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    if not item_vectors:
        raise ValueError("Cannot rank an empty candidate set")
    items = np.fromiter(item_vectors.keys(), dtype=np.int64, count=len(item_vectors))
    vectors = np.vstack([np.asarray(v, dtype=np.float64) for v in item_vectors.values()])
    return items, vectors


def _sorted_ranking(
    user_index: int, items: np.ndarray, scores: np.ndarray, keys: np.ndarray | None = None
) -> Ranking:
    # descending key (the score unless given), ascending item index on ties
    order = np.lexsort((items, -(scores if keys is None else keys)))
    return Ranking(
        user_index=user_index,
        entries=[(int(items[k]), float(scores[k])) for k in order],
    )


def rank_mlp(
    model: MlpModel,
    user_vector: np.ndarray,
    item_vectors: Mapping[int, np.ndarray],
    user_index: int = -1,
) -> Ranking:
    """
    Rank candidates by the MLP's interest probability.

    Ordering uses the logits, which stay distinct where the probability saturates.
    """
    items, vectors = _candidate_arrays(item_vectors)
    logits = predict_logits(model, np.asarray(user_vector)[None, :], vectors)
    return _sorted_ranking(user_index, items, squash(logits), keys=logits)


def cosine_scores(user_vector: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Cosine similarity of one vector against each row; zero-norm operands score 0."""
    user_vector = np.asarray(user_vector, dtype=np.float64)
    norms = np.linalg.norm(vectors, axis=1) * np.linalg.norm(user_vector)
    dots = vectors @ user_vector
    return np.divide(dots, norms, out=np.zeros_like(dots), where=norms > 0)


def rank_simple(
    user_vector: np.ndarray, item_vectors: Mapping[int, np.ndarray], user_index: int = -1
) -> Ranking:
    """Rank candidates by cosine similarity to the user vector."""
    items, vectors = _candidate_arrays(item_vectors)
    return _sorted_ranking(user_index, items, cosine_scores(user_vector, vectors))


def _dcg(ratings: list[int] | np.ndarray, n: int) -> float:
    ratings = np.asarray(ratings, dtype=np.float64)[:n]
    discounts = np.log2(np.arange(2, len(ratings) + 2, dtype=np.float64))
    return float(np.sum((2.0**ratings - 1.0) / discounts))


def ndcg_at_n(ranking: Ranking, test_ratings: Mapping[int, int], n: int) -> float:
    """
    Normalized discounted cumulative gain of a ranking at cutoff n.

    Gain is 2^r - 1 on the raw rating, the discount of 1-based position i is
    log2(i + 1), and the ideal ordering sorts every test rating in descending order.

    Args:
        ranking: Ranked items, all of which must carry a test rating
        test_ratings: item -> held-out rating
        n: Cutoff, at least 1

    Returns:
        NDCG in [0, 1]; 1 when the ideal DCG is 0
    """
    if n < 1:
        raise ValueError(f"NDCG cutoff must be >= 1, got {n}")
    missing = [item for item in ranking.items if item not in test_ratings]
    if missing:
        raise ValueError(f"Ranked items without a test rating: {missing[:5]}")

    ideal = _dcg(sorted(test_ratings.values(), reverse=True), n)
    if ideal == 0:
        return 1.0
    dcg = _dcg([test_ratings[item] for item in ranking.items], n)
    return min(dcg / ideal, 1.0)


class EvalReport(BaseModel):
    variant: str
    upl: int
    n_values: list[int]
    per_repetition: dict[int, list[float]]
    mean: dict[int, float]
    std: dict[int, float]

    @model_validator(mode="after")
    def _check_range(self) -> "EvalReport":
        values = [v for series in self.per_repetition.values() for v in series]
        values += list(self.mean.values())
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise ValueError("NDCG values must lie in [0, 1]")
        return self

    @classmethod
    def from_repetitions(
        cls, variant: str, upl: int, n_values: list[int], per_repetition: dict[int, list[float]]
    ) -> "EvalReport":
        """Mean and population standard deviation across repetitions."""
        return cls(
            variant=variant,
            upl=upl,
            n_values=list(n_values),
            per_repetition=per_repetition,
            mean={n: float(np.mean(per_repetition[n])) for n in n_values},
            std={n: float(np.std(per_repetition[n])) for n in n_values},
        )


def rank_user(
    fitted: FittedPipeline, user: int, candidates: list[int], user_index: int | None = None
) -> Ranking:
    """Rank candidate items for one user with the MLP, or by cosine without one."""
    item_vectors = {item: fitted.item_vectors[item] for item in candidates}
    user_vector = fitted.user_vectors[user]
    index = user if user_index is None else user_index
    if fitted.model is not None:
        return rank_mlp(fitted.model, user_vector, item_vectors, user_index=index)
    return rank_simple(user_vector, item_vectors, user_index=index)


def evaluate_split(
    split: TrainTestSplit,
    fitted: FittedPipeline,
    n_values: list[int] | tuple[int, ...] = NDCG_CUTOFFS,
    threads: int = 1,
) -> dict[int, float]:
    """
    Mean NDCG@n over the included users of one split.

    Each user's candidates are exactly their test items. Users are scored through a
    thread pool; results are gathered in user order before averaging.
    """

    def score(user: int) -> list[float]:
        test_ratings = split.test_ratings(user)
        ranking = rank_user(fitted, user, sorted(test_ratings))
        return [ndcg_at_n(ranking, test_ratings, n) for n in n_values]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        per_user = np.array(list(pool.map(score, split.included_users)))

    return {n: float(per_user[:, k].sum() / len(per_user)) for k, n in enumerate(n_values)}


def evaluate(
    dataset: Dataset,
    spec: PipelineSpec,
    split_config: SplitConfig,
    n_values: list[int] | tuple[int, ...] = NDCG_CUTOFFS,
    repetitions: int = 1,
    seed: int = 0,
    threads: int = 1,
    on_repetition: Callable[[int, TrainTestSplit, FittedPipeline], None] | None = None,
) -> EvalReport:
    """
    Repeat split -> pipeline -> NDCG with fresh seeded splits.

    Args:
        dataset: Full indexed rating log
        spec: Variant and per-stage configuration
        split_config: UPL and minimum test size; its seed is replaced per repetition
        n_values: NDCG cutoffs
        repetitions: Number of independent splits
        seed: Global seed every stage seed derives from
        threads: Workers for per-user scoring
        on_repetition: Called after each repetition with (repetition, split, fitted)

    Returns:
        Per-repetition means and their mean and standard deviation
    """
    if repetitions < 1:
        raise ValueError(f"repetitions must be >= 1, got {repetitions}")

    per_repetition: dict[int, list[float]] = {n: [] for n in n_values}
    for repetition in range(repetitions):
        config = split_config.model_copy(
            update={"seed": derive_seed(seed, f"split/{repetition}")}
        )
        split = split_upl(dataset, config)
        fitted = fit_pipeline(split, seeded_spec(spec, seed, repetition))
        means = evaluate_split(split, fitted, n_values, threads)
        for n in n_values:
            per_repetition[n].append(means[n])
        logger.info(
            f"{spec.label} UPL={split_config.upl} repetition {repetition + 1}/{repetitions}: "
            + ", ".join(f"NDCG@{n}={means[n]:.4f}" for n in n_values)
        )
        if on_repetition is not None:
            on_repetition(repetition, split, fitted)

    return EvalReport.from_repetitions(spec.label, split_config.upl, list(n_values), per_repetition)


def report_table(reports: list[EvalReport]) -> pd.DataFrame:
    """One row per report: variant, UPL, then mean and std for each cutoff."""
    rows = []
    for report in reports:
        row: dict[str, object] = {"variant": report.variant, "UPL": report.upl}
        for n in report.n_values:
            row[f"NDCG@{n} mean"] = report.mean[n]
            row[f"NDCG@{n} std"] = report.std[n]
        rows.append(row)
    return pd.DataFrame(rows)


def reference_table(upl: int) -> pd.DataFrame:
    """Published MovieLens-100K NDCG@5/NDCG@10 means for one UPL."""
    if upl not in REFERENCE_NDCG_ML100K:
        raise ValueError(f"No reference numbers for UPL={upl}")
    return pd.DataFrame(
        [
            {"ranker": name, "UPL": upl, "NDCG@5": ndcg5, "NDCG@10": ndcg10}
            for name, (ndcg5, ndcg10) in REFERENCE_NDCG_ML100K[upl].items()
        ]
    )


def write_reports(reports: list[EvalReport], out_dir: Path) -> pd.DataFrame:
    """Write the text table and its tab-separated dump."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = report_table(reports)
    (out_dir / REPORT_TABLE_FILE).write_text(
        table.to_string(index=False, float_format=lambda v: f"{v:.4f}") + "\n", encoding="utf-8"
    )
    table.to_csv(out_dir / REPORT_DATA_FILE, sep="\t", index=False, float_format="%.6f")
    return table
