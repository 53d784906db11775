"""
Target/context embeddings from the smoothed PCO matrix, and the direct user-item
factorization used as the representation ablation.

Both fit dot products of two vector tables to per-pair targets by minimizing squared
residuals with stochastic gradient descent over shuffled pairs.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field

from config import CONTEXT_VECTORS_FILE, TARGET_VECTORS_FILE
from dataset import TrainTestSplit
from errors import DimensionMismatchError, TrainingError
from pco import Basis, PcoMatrix
from utils import read_vectors, write_vectors

logger = logging.getLogger(__name__)


class Representation(str, Enum):
    TARGET = "target"
    CONTEXT = "context"
    SUM = "sum"


class EmbeddingConfig(BaseModel):
    dim: int = Field(default=100, ge=1, description="Vector dimensionality")
    learning_rate: float = Field(default=0.05, gt=0)
    epochs: int = Field(default=50, ge=1)
    init_scale: float = Field(default=0.01, gt=0, description="Uniform init half-width")
    seed: int = 0
    zero_pair_samples_per_entity: int = Field(
        default=0, ge=0, description="Zero-count pairs sampled per entity per epoch"
    )
    representation_mode: Representation = Representation.TARGET
    batch_size: int = Field(default=256, ge=1, description="Pairs per vectorized update")
    lr_decay: float = Field(default=0.95, gt=0, le=1, description="Per-epoch decay factor")


@dataclass(frozen=True)
class EmbeddingModel:
    target_vectors: np.ndarray
    context_vectors: np.ndarray
    basis: Basis

    def __post_init__(self):
        if self.target_vectors.shape != self.context_vectors.shape:
            raise DimensionMismatchError(
                f"Target {self.target_vectors.shape} and context "
                f"{self.context_vectors.shape} tables differ in shape"
            )

    @property
    def n(self) -> int:
        return self.target_vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.target_vectors.shape[1]


@dataclass
class TrainingTrace:
    cost_per_epoch: list[float] = field(default_factory=list)


def pair_gradients(
    u: np.ndarray, v: np.ndarray, targets: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """
    Gradients of (u . v - target)^2 with respect to u and v, row by row.

    Args:
        u: batch x dim rows of the first table
        v: batch x dim rows of the second table
        targets: batch regression targets

    Returns:
        (d/du, d/dv), each batch x dim
    """
    residuals = np.einsum("ij,ij->i", u, v) - targets
    scale = 2.0 * residuals[:, None]
    return scale * v, scale * u


def pair_cost(
    row_vectors: np.ndarray,
    col_vectors: np.ndarray,
    rows: np.ndarray,
    cols: np.ndarray,
    targets: np.ndarray,
) -> float:
    """Sum of squared residuals over the given pairs."""
    predictions = np.einsum("ij,ij->i", row_vectors[rows], col_vectors[cols])
    return float(np.sum((predictions - targets) ** 2))


def fit_pairs(
    rows: np.ndarray,
    cols: np.ndarray,
    targets: np.ndarray,
    n_rows: int,
    n_cols: int,
    config: EmbeddingConfig,
    zero_pair_sampler=None,
) -> tuple[np.ndarray, np.ndarray, TrainingTrace]:
    """
    Fit row_vectors[r] . col_vectors[c] to targets by mini-batch SGD.

    Pairs are reshuffled every epoch with one seeded generator; gradients of pairs in
    the same batch are accumulated with np.add.at, so batch_size=1 is plain per-pair SGD.
    The learning rate is multiplied by lr_decay after every epoch.

    Args:
        rows, cols, targets: The pair set and its regression targets
        n_rows, n_cols: Sizes of the two vector tables
        config: Dimensionality, learning-rate schedule, init and seed
        zero_pair_sampler: Optional callable(rng) -> (rows, cols) of extra pairs with
            target 0, drawn afresh every epoch

    Returns:
        (row_vectors, col_vectors, trace); the trace holds the cost over the fixed pair
        set after every epoch
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    targets = np.asarray(targets, dtype=np.float64)

    rng = np.random.default_rng(config.seed)
    scale = config.init_scale
    row_vectors = rng.uniform(-scale, scale, size=(n_rows, config.dim))
    col_vectors = rng.uniform(-scale, scale, size=(n_cols, config.dim))

    trace = TrainingTrace()
    learning_rate = config.learning_rate

    for epoch in range(1, config.epochs + 1):
        epoch_rows, epoch_cols, epoch_targets = rows, cols, targets
        if zero_pair_sampler is not None:
            zero_rows, zero_cols = zero_pair_sampler(rng)
            epoch_rows = np.concatenate([rows, zero_rows])
            epoch_cols = np.concatenate([cols, zero_cols])
            epoch_targets = np.concatenate([targets, np.zeros(len(zero_rows))])

        order = rng.permutation(len(epoch_rows))
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            r, c = epoch_rows[batch], epoch_cols[batch]
            grad_rows, grad_cols = pair_gradients(
                row_vectors[r], col_vectors[c], epoch_targets[batch]
            )
            np.add.at(row_vectors, r, -learning_rate * grad_rows)
            np.add.at(col_vectors, c, -learning_rate * grad_cols)

        if not (np.isfinite(row_vectors).all() and np.isfinite(col_vectors).all()):
            raise TrainingError("Embedding parameters diverged", epoch=epoch)

        cost_value = pair_cost(row_vectors, col_vectors, rows, cols, targets)
        trace.cost_per_epoch.append(cost_value)
        logger.debug(f"epoch {epoch}: J={cost_value:.6f} lr={learning_rate:.5f}")
        learning_rate *= config.lr_decay

    return row_vectors, col_vectors, trace


def _zero_pair_sampler(pco: PcoMatrix, samples_per_entity: int):
    """Sampler of (i, j) pairs with i != j and P_ij = 0, `samples_per_entity` draws per i."""
    rows, cols, _ = pco.ordered_pairs()
    nonzero_keys = np.sort(rows * pco.n + cols)

    def sample(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        candidate_rows = np.repeat(np.arange(pco.n, dtype=np.int64), samples_per_entity)
        candidate_cols = rng.integers(0, pco.n, size=len(candidate_rows))
        keys = candidate_rows * pco.n + candidate_cols
        keep = (candidate_rows != candidate_cols) & ~np.isin(keys, nonzero_keys)
        return candidate_rows[keep], candidate_cols[keep]

    return sample


def factorize_pco(
    pco: PcoMatrix, config: EmbeddingConfig
) -> tuple[EmbeddingModel, TrainingTrace]:
    """
    Learn target and context vectors whose dot products fit f(P_ij).

    Every stored pair is trained in both orientations; optional zero-count pairs are
    sampled per epoch with target 0.

    Args:
        pco: Co-occurrence matrix over the basic entity
        config: Training hyperparameters

    Returns:
        The embedding model and its per-epoch cost trace
    """
    if pco.nnz == 0:
        raise ValueError("Cannot factorize an empty PCO matrix")

    rows, cols, targets = pco.smoothed_targets()
    sampler = None
    if config.zero_pair_samples_per_entity > 0:
        sampler = _zero_pair_sampler(pco, config.zero_pair_samples_per_entity)

    logger.info(
        f"Factorizing {pco.basis.value} PCO: {len(rows)} ordered pairs, dim={config.dim}, "
        f"epochs={config.epochs}"
    )
    target_vectors, context_vectors, trace = fit_pairs(
        rows, cols, targets, pco.n, pco.n, config, zero_pair_sampler=sampler
    )
    logger.info(
        f"Embedding cost {trace.cost_per_epoch[0]:.4f} -> {trace.cost_per_epoch[-1]:.4f}"
    )
    return EmbeddingModel(target_vectors, context_vectors, pco.basis), trace


def cost(model: EmbeddingModel, pco: PcoMatrix, include_zero_pairs: bool = False) -> float:
    """
    Evaluate the factorization cost J.

    Args:
        model: Target/context vectors
        pco: The matrix the model was fitted to
        include_zero_pairs: False sums over the stored pairs in both orientations (the
            training pair set); True sums over every i != j, absent pairs with target 0

    Returns:
        Sum of squared residuals
    """
    if model.n != pco.n:
        raise DimensionMismatchError(f"Model has {model.n} entities, PCO has {pco.n}")

    if include_zero_pairs:
        residuals = model.target_vectors @ model.context_vectors.T - pco.smoothed_dense()
        np.fill_diagonal(residuals, 0.0)
        return float(np.sum(residuals**2))

    rows, cols, targets = pco.smoothed_targets()
    return pair_cost(model.target_vectors, model.context_vectors, rows, cols, targets)


def entity_vector(
    model: EmbeddingModel, index: int, mode: Representation = Representation.TARGET
) -> np.ndarray:
    """Vector of one basic entity: its target row, context row, or their sum."""
    if not 0 <= index < model.n:
        raise IndexError(f"Entity index {index} outside [0, {model.n})")
    return entity_matrix(model, mode)[index]


def entity_matrix(
    model: EmbeddingModel, mode: Representation = Representation.TARGET
) -> np.ndarray:
    """All basic-entity vectors under the chosen representation, n x dim."""
    match Representation(mode):
        case Representation.TARGET:
            return model.target_vectors
        case Representation.CONTEXT:
            return model.context_vectors
        case Representation.SUM:
            return model.target_vectors + model.context_vectors


def factorize_user_item(
    split: TrainTestSplit, config: EmbeddingConfig
) -> tuple[np.ndarray, np.ndarray]:
    """
    Factorize the observed training interests r / r_max into user and item vectors.

    Only observed entries are fitted; unrated pairs do not enter the loss.

    Args:
        split: Train/test split; its train ratings are the observed entries
        config: Training hyperparameters (zero-pair sampling does not apply)

    Returns:
        (user_vectors num_users x dim, item_vectors num_items x dim)
    """
    train = split.train
    for user in split.included_users:
        if not train.user_profiles[user]:
            raise ValueError(f"Included user {user} has no training ratings")
    if not train.ratings:
        raise ValueError("Cannot factorize a split without training ratings")

    users, items, ratings = (np.array(column) for column in zip(*train.ratings))
    interests = ratings / train.r_max

    logger.info(
        f"Factorizing user-item interests: {len(users)} observed entries, dim={config.dim}"
    )
    user_vectors, item_vectors, trace = fit_pairs(
        users, items, interests, train.num_users, train.num_items, config
    )
    logger.info(
        f"User-item cost {trace.cost_per_epoch[0]:.4f} -> {trace.cost_per_epoch[-1]:.4f}"
    )
    return user_vectors, item_vectors


def save_embedding(model: EmbeddingModel, out_dir: Path) -> None:
    """Write the target and context tables as separate vector files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_vectors(out_dir / TARGET_VECTORS_FILE, model.target_vectors)
    write_vectors(out_dir / CONTEXT_VECTORS_FILE, model.context_vectors)


def load_embedding(out_dir: Path, basis: Basis) -> EmbeddingModel:
    """Reload tables written by save_embedding."""
    out_dir = Path(out_dir)
    return EmbeddingModel(
        target_vectors=read_vectors(out_dir / TARGET_VECTORS_FILE),
        context_vectors=read_vectors(out_dir / CONTEXT_VECTORS_FILE),
        basis=Basis(basis),
    )
