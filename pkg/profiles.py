"""
Vectors for the non-basic entity, aggregated from the basic-entity embeddings.

Under an item basis each user is the sum of the vectors of the items in their training
profile (binary), or the same sum weighted by the user's mean-centered ratings. Under a
user basis the roles swap: each item aggregates the users who rated it.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Literal

import numpy as np
from pydantic import BaseModel
from scipy import sparse

from dataset import Dataset, TrainTestSplit
from embedding import EmbeddingModel, Representation, entity_matrix
from errors import BasisMismatchError
from pco import Basis

logger = logging.getLogger(__name__)


class Aggregation(str, Enum):
    BINARY = "binary"
    RATE_CENTERED = "rate-centered"


class ProfilesConfig(BaseModel):
    aggregation: Literal["auto", "binary", "rate-centered"] = "auto"
    normalize: bool = False


@dataclass(frozen=True)
class EntityVectors:
    vectors: np.ndarray
    aggregation: Aggregation
    means: np.ndarray | None = None


def _profiles_of_aggregated(model: EmbeddingModel, train: Dataset, basis: Basis | None):
    """Profiles of the non-basic entity, checking the model against the split."""
    if basis is not None and Basis(basis) != model.basis:
        raise BasisMismatchError(
            f"Model is {model.basis.value}-based, {Basis(basis).value}-based vectors requested"
        )
    if model.basis == Basis.ITEM:
        expected, profiles = train.num_items, train.user_profiles
    else:
        expected, profiles = train.num_users, train.item_profiles
    if model.n != expected:
        raise BasisMismatchError(
            f"{model.basis.value}-based model has {model.n} entities, split has {expected}"
        )
    return profiles


def _weighted_sum(profiles, weights_of, basic_vectors: np.ndarray) -> np.ndarray:
    rows, cols, weights = [], [], []
    for entity, profile in enumerate(profiles):
        for (member, _), weight in zip(profile, weights_of(entity, profile)):
            rows.append(entity)
            cols.append(member)
            weights.append(weight)
    weight_matrix = sparse.csr_matrix(
        (
            np.array(weights, dtype=np.float64),
            (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64)),
        ),
        shape=(len(profiles), basic_vectors.shape[0]),
    )
    return np.asarray(weight_matrix @ basic_vectors)


def _l2_normalize(vectors: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    return np.divide(vectors, norms, out=np.zeros_like(vectors), where=norms > 0)


def aggregate_binary(
    model: EmbeddingModel,
    split: TrainTestSplit,
    mode: Representation = Representation.TARGET,
    basis: Basis | None = None,
    normalize: bool = False,
) -> EntityVectors:
    """
    Sum the basic-entity vectors over each training profile.

    Args:
        model: Embeddings of the basic entity
        split: Split whose train profiles are aggregated
        mode: Which basic-entity representation to sum
        basis: Expected basis of the model; a different model basis is an error
        normalize: L2-normalize the aggregated vectors

    Returns:
        One vector per non-basic entity
    """
    profiles = _profiles_of_aggregated(model, split.train, basis)
    vectors = _weighted_sum(
        profiles, lambda _, profile: [1.0] * len(profile), entity_matrix(model, mode)
    )
    if normalize:
        vectors = _l2_normalize(vectors)
    return EntityVectors(vectors=vectors, aggregation=Aggregation.BINARY)


def aggregate_rate_centered(
    model: EmbeddingModel,
    split: TrainTestSplit,
    mode: Representation = Representation.TARGET,
    basis: Basis | None = None,
    normalize: bool = False,
) -> EntityVectors:
    """
    Sum the basic-entity vectors over each training profile, weighted by r - mean(r).

    The mean is taken over training ratings only. Entities whose training ratings are
    all equal get the zero vector and are kept as such.

    Args:
        model: Embeddings of the basic entity
        split: Split whose train profiles and ratings are aggregated
        mode: Which basic-entity representation to sum
        basis: Expected basis of the model; a different model basis is an error
        normalize: L2-normalize the aggregated vectors

    Returns:
        One vector per non-basic entity, with the per-entity rating means
    """
    profiles = _profiles_of_aggregated(model, split.train, basis)
    means = np.array(
        [np.mean([r for _, r in profile]) if profile else 0.0 for profile in profiles]
    )
    vectors = _weighted_sum(
        profiles,
        lambda entity, profile: [r - means[entity] for _, r in profile],
        entity_matrix(model, mode),
    )

    degenerate = sum(
        1 for profile in profiles if profile and len({r for _, r in profile}) == 1
    )
    if degenerate:
        logger.warning(
            f"{degenerate} profiles have constant ratings and aggregate to the zero vector"
        )

    if normalize:
        vectors = _l2_normalize(vectors)
    return EntityVectors(vectors=vectors, aggregation=Aggregation.RATE_CENTERED, means=means)


def resolve_aggregation(config: ProfilesConfig, train: Dataset) -> Aggregation:
    """Map "auto" to rate-centered when the log carries graded ratings, binary otherwise."""
    if config.aggregation != "auto":
        return Aggregation(config.aggregation)
    graded = len({rating for _, _, rating in train.ratings}) > 1
    return Aggregation.RATE_CENTERED if graded else Aggregation.BINARY


def aggregate(
    model: EmbeddingModel,
    split: TrainTestSplit,
    config: ProfilesConfig,
    mode: Representation = Representation.TARGET,
) -> EntityVectors:
    """Aggregate with the configured scheme."""
    aggregation = resolve_aggregation(config, split.train)
    logger.info(f"Aggregating {aggregation.value} vectors over a {model.basis.value} basis")
    if aggregation == Aggregation.BINARY:
        return aggregate_binary(model, split, mode, normalize=config.normalize)
    return aggregate_rate_centered(model, split, mode, normalize=config.normalize)
