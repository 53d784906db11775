"""
Single-hidden-layer perceptron mapping a concatenated (user, item) vector pair to the
probability that the user likes the item.

    p = sigmoid(W_out . ReLU(W [u; v] + b) + b_out)

Trained on interest levels (rating / r_max) with mini-batch SGD and inverted dropout on
the hidden layer; the hidden size is picked on a held-out validation fraction.
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, field_validator
from scipy.special import expit

from config import HIDDEN_CANDIDATES
from errors import ArtifactError, DimensionMismatchError, TrainingError
from utils import format_float

logger = logging.getLogger(__name__)

_PROBABILITY_FLOOR = np.nextafter(0.0, 1.0)
_PROBABILITY_CEILING = np.nextafter(1.0, 0.0)


class Loss(str, Enum):
    CROSS_ENTROPY = "cross-entropy"
    SQUARED_ERROR = "squared-error"


class MlpConfig(BaseModel):
    hidden_candidates: list[int] = Field(default_factory=lambda: list(HIDDEN_CANDIDATES))
    dropout_rate: float = Field(default=0.5, ge=0, lt=1)
    learning_rate: float = Field(default=0.01, gt=0)
    epochs: int = Field(default=100, ge=1)
    validation_fraction: float = Field(default=0.05, gt=0, lt=1)
    loss: Loss = Loss.CROSS_ENTROPY
    batch_size: int = Field(default=64, ge=1)
    seed: int = 0

    @field_validator("hidden_candidates", mode="before")
    @classmethod
    def _split_candidates(cls, value):
        if isinstance(value, str):
            value = [int(v) for v in value.split(",") if v.strip()]
        return value

    @field_validator("hidden_candidates")
    @classmethod
    def _check_candidates(cls, value: list[int]) -> list[int]:
        if not value or any(h < 1 for h in value):
            raise ValueError("hidden_candidates must be a non-empty list of positive sizes")
        return sorted(set(value))


@dataclass(frozen=True)
class MlpModel:
    W: np.ndarray
    b: np.ndarray
    W_out: np.ndarray
    b_out: float

    def __post_init__(self):
        hidden = self.W.shape[0]
        if self.W.ndim != 2 or self.W.shape[1] % 2 != 0:
            raise DimensionMismatchError(f"W must be hidden x (2*dim), got {self.W.shape}")
        if self.b.shape != (hidden,) or self.W_out.shape != (1, hidden):
            raise DimensionMismatchError(
                f"Bias {self.b.shape} and output {self.W_out.shape} "
                f"inconsistent with W {self.W.shape}"
            )

    @property
    def hidden(self) -> int:
        return self.W.shape[0]

    @property
    def dim(self) -> int:
        return self.W.shape[1] // 2


@dataclass(frozen=True)
class TrainingExample:
    user_vector: np.ndarray
    item_vector: np.ndarray
    interest: float


@dataclass(frozen=True)
class Gradients:
    W: np.ndarray
    b: np.ndarray
    W_out: np.ndarray
    b_out: float


class SelectionReport(BaseModel):
    validation_loss: dict[int, float]
    chosen_hidden: int
    train_loss_per_epoch: list[float]


def init_model(dim: int, hidden: int, rng: np.random.Generator) -> MlpModel:
    """He-initialized weights, zero biases."""
    return MlpModel(
        W=rng.normal(0.0, np.sqrt(2.0 / (2 * dim)), size=(hidden, 2 * dim)),
        b=np.zeros(hidden),
        W_out=rng.normal(0.0, np.sqrt(1.0 / hidden), size=(1, hidden)),
        b_out=0.0,
    )


def _inputs(model: MlpModel, users: np.ndarray, items: np.ndarray) -> np.ndarray:
    users = np.atleast_2d(np.asarray(users, dtype=np.float64))
    items = np.atleast_2d(np.asarray(items, dtype=np.float64))
    if users.shape[1] != model.dim or items.shape[1] != model.dim:
        raise DimensionMismatchError(
            f"Model expects {model.dim}-dim vectors, got {users.shape[1]} and {items.shape[1]}"
        )
    if users.shape[0] != items.shape[0]:
        users = np.broadcast_to(users, (items.shape[0], model.dim))
    return np.hstack([users, items])


def _logits(model: MlpModel, inputs: np.ndarray, mask: np.ndarray | None = None):
    pre_activation = inputs @ model.W.T + model.b
    hidden = np.maximum(pre_activation, 0.0)
    if mask is not None:
        hidden = hidden * mask
    return pre_activation, hidden, hidden @ model.W_out[0] + model.b_out


def predict_logits(model: MlpModel, users: np.ndarray, items: np.ndarray) -> np.ndarray:
    """Pre-sigmoid scores for row-aligned user/item vectors; one user row broadcasts."""
    _, _, logits = _logits(model, _inputs(model, users, items))
    return logits


def squash(logits: np.ndarray) -> np.ndarray:
    """Sigmoid clipped to the open interval (0, 1)."""
    return np.clip(expit(logits), _PROBABILITY_FLOOR, _PROBABILITY_CEILING)


def predict_batch(model: MlpModel, users: np.ndarray, items: np.ndarray) -> np.ndarray:
    """Probabilities for row-aligned user/item vectors; one user row broadcasts."""
    return squash(predict_logits(model, users, items))


def forward(model: MlpModel, user_vector: np.ndarray, item_vector: np.ndarray) -> float:
    """Interest probability of one (user, item) pair; dropout is inactive."""
    return float(predict_batch(model, user_vector, item_vector)[0])


def _loss_from_logits(logits: np.ndarray, targets: np.ndarray, loss: Loss) -> float:
    if loss == Loss.CROSS_ENTROPY:
        # log(1 + e^z) - y z, evaluated without overflow
        return float(np.mean(np.logaddexp(0.0, logits) - targets * logits))
    return float(np.mean((expit(logits) - targets) ** 2))


def loss_and_gradients(
    model: MlpModel,
    users: np.ndarray,
    items: np.ndarray,
    targets: np.ndarray,
    loss: Loss = Loss.CROSS_ENTROPY,
    mask: np.ndarray | None = None,
) -> tuple[float, Gradients]:
    """
    Mean batch loss and its gradients with respect to every parameter.

    Args:
        model: Current parameters
        users, items: batch x dim input halves
        targets: Interest levels in [0, 1]
        loss: Cross-entropy against soft targets, or squared error on the probability
        mask: Optional batch x hidden dropout mask, already scaled by 1 / (1 - p)

    Returns:
        (loss, gradients)
    """
    inputs = _inputs(model, users, items)
    targets = np.asarray(targets, dtype=np.float64)
    pre_activation, hidden, logits = _logits(model, inputs, mask)
    probabilities = expit(logits)
    batch = len(targets)

    if loss == Loss.CROSS_ENTROPY:
        d_logits = (probabilities - targets) / batch
    else:
        d_logits = 2.0 * (probabilities - targets) * probabilities * (1.0 - probabilities) / batch

    d_hidden = np.outer(d_logits, model.W_out[0])
    if mask is not None:
        d_hidden = d_hidden * mask
    d_pre = d_hidden * (pre_activation > 0)

    gradients = Gradients(
        W=d_pre.T @ inputs,
        b=d_pre.sum(axis=0),
        W_out=(d_logits @ hidden)[None, :],
        b_out=float(d_logits.sum()),
    )
    return _loss_from_logits(logits, targets, loss), gradients


def _sgd_step(model: MlpModel, gradients: Gradients, learning_rate: float) -> MlpModel:
    return MlpModel(
        W=model.W - learning_rate * gradients.W,
        b=model.b - learning_rate * gradients.b,
        W_out=model.W_out - learning_rate * gradients.W_out,
        b_out=model.b_out - learning_rate * gradients.b_out,
    )


def dataset_loss(model: MlpModel, users, items, targets, loss: Loss) -> float:
    """Mean loss over a set without dropout."""
    _, _, logits = _logits(model, _inputs(model, users, items))
    return _loss_from_logits(logits, np.asarray(targets, dtype=np.float64), loss)


def stack_examples(examples: list[TrainingExample]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack examples into (users, items, interests) arrays."""
    users = np.vstack([e.user_vector for e in examples]).astype(np.float64)
    items = np.vstack([e.item_vector for e in examples]).astype(np.float64)
    interests = np.array([e.interest for e in examples], dtype=np.float64)
    return users, items, interests


def dropout_mask(rng: np.random.Generator, shape: tuple[int, int], rate: float) -> np.ndarray:
    """Inverted-dropout mask: units kept with probability 1 - rate, scaled by 1 / (1 - rate)."""
    keep = 1.0 - rate
    return (rng.random(shape) < keep) / keep


def _fit_candidate(
    hidden: int,
    users: np.ndarray,
    items: np.ndarray,
    targets: np.ndarray,
    config: MlpConfig,
) -> tuple[MlpModel, list[float]]:
    rng = np.random.default_rng([config.seed, hidden])
    model = init_model(users.shape[1], hidden, rng)
    train_loss: list[float] = []

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(targets))
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            mask = None
            if config.dropout_rate > 0:
                mask = dropout_mask(rng, (len(batch), hidden), config.dropout_rate)
            _, gradients = loss_and_gradients(
                model, users[batch], items[batch], targets[batch], config.loss, mask
            )
            model = _sgd_step(model, gradients, config.learning_rate)

        epoch_loss = dataset_loss(model, users, items, targets, config.loss)
        if not np.isfinite(epoch_loss):
            raise TrainingError("MLP loss is not finite", epoch=epoch, candidate=hidden)
        train_loss.append(epoch_loss)

    return model, train_loss


def train(
    examples: list[TrainingExample], config: MlpConfig, dim: int
) -> tuple[MlpModel, SelectionReport]:
    """
    Train one network per hidden-size candidate and keep the best on validation loss.

    Args:
        examples: (user vector, item vector, interest) triples
        config: Candidates, dropout, optimizer settings, validation fraction and seed
        dim: Dimensionality of each input half

    Returns:
        The winning model (no retraining) and the per-candidate validation losses
    """
    if not examples:
        raise ValueError("Cannot train the MLP without examples")
    users, items, targets = stack_examples(examples)
    if users.shape[1] != dim or items.shape[1] != dim:
        raise DimensionMismatchError(
            f"Examples have {users.shape[1]}/{items.shape[1]}-dim halves, expected {dim}"
        )

    order = np.random.default_rng(config.seed).permutation(len(targets))
    n_validation = int(round(config.validation_fraction * len(targets)))
    if 0 < n_validation < len(targets):
        validation, fitting = order[:n_validation], order[n_validation:]
    else:
        logger.warning(
            f"{len(targets)} examples are too few for a validation split; "
            f"selecting on the training set"
        )
        validation = fitting = order

    best: tuple[float, MlpModel, list[float]] | None = None
    validation_loss: dict[int, float] = {}
    for hidden in config.hidden_candidates:
        model, train_loss = _fit_candidate(
            hidden, users[fitting], items[fitting], targets[fitting], config
        )
        loss_value = dataset_loss(
            model, users[validation], items[validation], targets[validation], config.loss
        )
        validation_loss[hidden] = loss_value
        logger.info(f"hidden={hidden}: validation loss {loss_value:.6f}")
        if best is None or loss_value < best[0]:
            best = (loss_value, model, train_loss)

    assert best is not None
    _, model, train_loss = best
    logger.info(f"Selected hidden size {model.hidden}")
    return model, SelectionReport(
        validation_loss=validation_loss,
        chosen_hidden=model.hidden,
        train_loss_per_epoch=train_loss,
    )


def gradient_check(
    model: MlpModel,
    example: TrainingExample,
    loss: Loss = Loss.CROSS_ENTROPY,
    step: float = 1e-5,
) -> float:
    """
    Compare analytic gradients against central finite differences.

    Relative error is |a - n| / max(|a|, |n|), falling back to the absolute error when
    both magnitudes are below 1e-8.

    Returns:
        Maximum error over all parameters
    """
    users = example.user_vector[None, :]
    items = example.item_vector[None, :]
    targets = np.array([example.interest])
    _, analytic = loss_and_gradients(model, users, items, targets, loss)

    def loss_at(candidate: MlpModel) -> float:
        return dataset_loss(candidate, users, items, targets, loss)

    worst = 0.0
    for name in ("W", "b", "W_out", "b_out"):
        value = np.atleast_1d(np.asarray(getattr(model, name), dtype=np.float64))
        grad = np.atleast_1d(np.asarray(getattr(analytic, name), dtype=np.float64))
        for index in np.ndindex(value.shape):
            plus, minus = value.copy(), value.copy()
            plus[index] += step
            minus[index] -= step
            if name == "b_out":
                above = replace(model, b_out=float(plus[0]))
                below = replace(model, b_out=float(minus[0]))
            else:
                above = replace(model, **{name: plus})
                below = replace(model, **{name: minus})
            numeric = (loss_at(above) - loss_at(below)) / (2 * step)
            a = float(grad[index])
            scale = max(abs(a), abs(numeric))
            error = abs(a - numeric) if scale < 1e-8 else abs(a - numeric) / scale
            worst = max(worst, error)
    return worst


def save_model(model: MlpModel, path: Path) -> None:
    """Write `dim hidden`, then W rows, b, W_out and b_out, one block per structure."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{model.dim} {model.hidden}\n")
        for row in model.W.tolist():
            f.write(" ".join(format_float(x) for x in row) + "\n")
        f.write(" ".join(format_float(x) for x in model.b.tolist()) + "\n")
        f.write(" ".join(format_float(x) for x in model.W_out[0].tolist()) + "\n")
        f.write(format_float(model.b_out) + "\n")


def load_model(path: Path) -> MlpModel:
    """Reload a model written by save_model."""
    path = Path(path)
    if not path.is_file():
        raise ArtifactError(f"Model file not found: {path}")
    lines = [line.split() for line in path.read_text(encoding="utf-8").splitlines() if line]
    try:
        dim, hidden = int(lines[0][0]), int(lines[0][1])
        W = np.array([[float(x) for x in row] for row in lines[1 : 1 + hidden]])
        b = np.array([float(x) for x in lines[1 + hidden]])
        W_out = np.array([[float(x) for x in lines[2 + hidden]]])
        b_out = float(lines[3 + hidden][0])
    except (IndexError, ValueError) as e:
        raise ArtifactError(f"{path}: malformed model file ({e})") from e
    if W.shape != (hidden, 2 * dim):
        raise ArtifactError(f"{path}: W has shape {W.shape}, header says {hidden}x{2 * dim}")
    return MlpModel(W=W, b=b, W_out=W_out, b_out=b_out)


def write_selection(report: SelectionReport, path: Path) -> None:
    """Write the per-candidate validation losses as TSV."""
    pd.DataFrame(
        {
            "hidden": list(report.validation_loss),
            "validation_loss": [format_float(v) for v in report.validation_loss.values()],
            "chosen": [h == report.chosen_hidden for h in report.validation_loss],
        }
    ).to_csv(path, sep="\t", index=False)
