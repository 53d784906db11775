"""
Per-split pipeline: PCO -> factorization -> aggregation -> MLP (or nothing for the
simple variant), plus persistence of every intermediate artifact.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field

from config import ITEM_VECTORS_FILE, MODEL_FILE, PCO_FILE, SELECTION_FILE, USER_VECTORS_FILE
from dataset import TrainTestSplit, dump_split, load_split
from embedding import (
    EmbeddingConfig,
    EmbeddingModel,
    entity_matrix,
    factorize_pco,
    factorize_user_item,
    save_embedding,
)
from errors import ArtifactError, DimensionMismatchError
from mlp import (
    MlpConfig,
    MlpModel,
    SelectionReport,
    TrainingExample,
    load_model,
    save_model,
    write_selection,
)
from mlp import train as train_mlp
from pco import Basis, PcoConfig, PcoMatrix, build_pco, dump_pco
from profiles import EntityVectors, ProfilesConfig, aggregate
from utils import derive_seed, read_vectors, write_vectors

logger = logging.getLogger(__name__)


class Variant(str, Enum):
    GEMRANK_MLP = "gemrank-mlp"
    GEMRANK_SIMPLE = "gemrank-simple"
    USER_ITEM_MF = "user-item-mf"


class PipelineSpec(BaseModel):
    basis: Basis = Basis.ITEM
    variant: Variant = Variant.GEMRANK_MLP
    pco: PcoConfig = Field(default_factory=PcoConfig)
    embedding: EmbeddingConfig = Field(default_factory=EmbeddingConfig)
    profiles: ProfilesConfig = Field(default_factory=ProfilesConfig)
    mlp: MlpConfig = Field(default_factory=MlpConfig)

    @property
    def label(self) -> str:
        """Report label: item-based, user-based, simple or user-item."""
        match self.variant:
            case Variant.USER_ITEM_MF:
                return "user-item"
            case Variant.GEMRANK_SIMPLE:
                return "simple" if self.basis == Basis.ITEM else "simple (user-based)"
            case _:
                return f"{self.basis.value}-based"

    @property
    def uses_mlp(self) -> bool:
        return self.variant != Variant.GEMRANK_SIMPLE


@dataclass(frozen=True)
class FittedPipeline:
    user_vectors: np.ndarray
    item_vectors: np.ndarray
    model: MlpModel | None = None
    selection: SelectionReport | None = None
    pco: PcoMatrix | None = None
    embedding: EmbeddingModel | None = None
    aggregated: EntityVectors | None = None

    def __post_init__(self):
        if self.user_vectors.shape[1] != self.item_vectors.shape[1]:
            raise DimensionMismatchError(
                f"User vectors are {self.user_vectors.shape[1]}-dim, "
                f"item vectors {self.item_vectors.shape[1]}-dim"
            )


def seeded_spec(spec: PipelineSpec, seed: int, repetition: int) -> PipelineSpec:
    """Copy of spec whose stage seeds derive from the global seed and repetition."""
    return spec.model_copy(
        update={
            "embedding": spec.embedding.model_copy(
                update={"seed": derive_seed(seed, f"embedding/{repetition}")}
            ),
            "mlp": spec.mlp.model_copy(update={"seed": derive_seed(seed, f"mlp/{repetition}")}),
        }
    )


LABELLED_VARIANTS: dict[str, tuple[Basis, Variant]] = {
    "item-based": (Basis.ITEM, Variant.GEMRANK_MLP),
    "user-based": (Basis.USER, Variant.GEMRANK_MLP),
    "simple": (Basis.ITEM, Variant.GEMRANK_SIMPLE),
    "simple (user-based)": (Basis.USER, Variant.GEMRANK_SIMPLE),
    "user-item": (Basis.ITEM, Variant.USER_ITEM_MF),
}


def spec_for_label(spec: PipelineSpec, label: str) -> PipelineSpec:
    """Copy of spec switched to the basis and variant a report label stands for."""
    if label not in LABELLED_VARIANTS:
        raise ValueError(
            f"Unknown variant label {label!r}; expected one of {list(LABELLED_VARIANTS)}"
        )
    basis, variant = LABELLED_VARIANTS[label]
    return spec.model_copy(update={"basis": basis, "variant": variant})


def vectors_from_embedding(
    embedding: EmbeddingModel, split: TrainTestSplit, spec: PipelineSpec
) -> tuple[np.ndarray, np.ndarray, EntityVectors]:
    """
    Place basic-entity vectors and aggregated vectors on the user and item sides.

    Returns:
        (user_vectors, item_vectors, aggregated)
    """
    mode = spec.embedding.representation_mode
    aggregated = aggregate(embedding, split, spec.profiles, mode)
    basic = entity_matrix(embedding, mode)
    if embedding.basis == Basis.ITEM:
        return aggregated.vectors, basic, aggregated
    return basic, aggregated.vectors, aggregated


def training_examples(
    split: TrainTestSplit, user_vectors: np.ndarray, item_vectors: np.ndarray
) -> list[TrainingExample]:
    """One example per training rating, with interest level rating / r_max."""
    train = split.train
    return [
        TrainingExample(
            user_vector=user_vectors[user],
            item_vector=item_vectors[item],
            interest=rating / train.r_max,
        )
        for user, item, rating in train.ratings
    ]


def fit_mlp(
    split: TrainTestSplit, user_vectors: np.ndarray, item_vectors: np.ndarray, config: MlpConfig
) -> tuple[MlpModel, SelectionReport]:
    examples = training_examples(split, user_vectors, item_vectors)
    logger.info(f"Training MLP on {len(examples)} examples, candidates {config.hidden_candidates}")
    return train_mlp(examples, config, dim=user_vectors.shape[1])


def fit_pipeline(split: TrainTestSplit, spec: PipelineSpec) -> FittedPipeline:
    """
    Run every training stage of one variant on one split.

    Args:
        split: Train/test split; only its training part is used
        spec: Variant, basis and per-stage configuration (seeds included)

    Returns:
        The user/item representations, the MLP when the variant has one, and the
        intermediate artifacts
    """
    pco = embedding = aggregated = None
    if spec.variant == Variant.USER_ITEM_MF:
        user_vectors, item_vectors = factorize_user_item(split, spec.embedding)
    else:
        pco = build_pco(split.train, spec.basis, spec.pco.log_base)
        embedding, _ = factorize_pco(pco, spec.embedding)
        user_vectors, item_vectors, aggregated = vectors_from_embedding(embedding, split, spec)

    model = selection = None
    if spec.uses_mlp:
        model, selection = fit_mlp(split, user_vectors, item_vectors, spec.mlp)

    return FittedPipeline(
        user_vectors=user_vectors,
        item_vectors=item_vectors,
        model=model,
        selection=selection,
        pco=pco,
        embedding=embedding,
        aggregated=aggregated,
    )


def save_pipeline_artifacts(split: TrainTestSplit, fitted: FittedPipeline, out_dir: Path) -> None:
    """Write the split, PCO, embeddings, entity vectors, model and selection report."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dump_split(split, out_dir)
    if fitted.pco is not None:
        dump_pco(fitted.pco, out_dir / PCO_FILE)
    if fitted.embedding is not None:
        save_embedding(fitted.embedding, out_dir)
    write_vectors(out_dir / USER_VECTORS_FILE, fitted.user_vectors)
    write_vectors(out_dir / ITEM_VECTORS_FILE, fitted.item_vectors)
    if fitted.model is not None:
        save_model(fitted.model, out_dir / MODEL_FILE)
    if fitted.selection is not None:
        write_selection(fitted.selection, out_dir / SELECTION_FILE)
    logger.info(f"Artifacts written to {out_dir}")


def load_pipeline_artifacts(
    out_dir: Path, spec: PipelineSpec, r_max: int
) -> tuple[TrainTestSplit, FittedPipeline]:
    """Reload the split, entity vectors and (for MLP variants) the model."""
    out_dir = Path(out_dir)
    split = load_split(out_dir, r_max=r_max)
    user_vectors = read_vectors(out_dir / USER_VECTORS_FILE)
    item_vectors = read_vectors(out_dir / ITEM_VECTORS_FILE)
    if user_vectors.shape[0] != split.train.num_users:
        raise ArtifactError(
            f"{USER_VECTORS_FILE} has {user_vectors.shape[0]} rows, "
            f"split has {split.train.num_users} users"
        )
    if item_vectors.shape[0] != split.train.num_items:
        raise ArtifactError(
            f"{ITEM_VECTORS_FILE} has {item_vectors.shape[0]} rows, "
            f"split has {split.train.num_items} items"
        )
    model = load_model(out_dir / MODEL_FILE) if spec.uses_mlp else None
    return split, FittedPipeline(user_vectors=user_vectors, item_vectors=item_vectors, model=model)
