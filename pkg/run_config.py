"""
Run configuration: pydantic models, the flat `section.key = value` config file, and the
effective-config echo written next to every run's outputs.
"""

import logging
from enum import Enum
from pathlib import Path

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from config import DEFAULT_REPETITIONS, EFFECTIVE_CONFIG_FILE, MOVIELENS_R_MAX, NDCG_CUTOFFS
from dataset import SplitConfig
from embedding import EmbeddingConfig
from errors import ConfigError
from mlp import MlpConfig
from pco import Basis, PcoConfig
from pipeline import PipelineSpec, Variant
from profiles import ProfilesConfig

logger = logging.getLogger(__name__)

_DELIMITER_NAMES = {"tab": "\t", "comma": ",", "space": " "}
_DELIMITER_TEXT = {v: k for k, v in _DELIMITER_NAMES.items()}


class DataConfig(BaseModel):
    path: str = Field(default="", description="Rating log; empty means GEMRANK_DATA_DIR")
    delimiter: str = "\t"
    r_max: int = Field(default=MOVIELENS_R_MAX, ge=1)

    @field_validator("delimiter", mode="before")
    @classmethod
    def _named_delimiter(cls, value):
        if isinstance(value, str):
            value = _DELIMITER_NAMES.get(value.lower(), value)
        if not value:
            raise ValueError("delimiter must not be empty")
        return value


class EvalConfig(BaseModel):
    n_values: list[int] = Field(default_factory=lambda: list(NDCG_CUTOFFS))
    repetitions: int = Field(default=DEFAULT_REPETITIONS, ge=1)

    @field_validator("n_values", mode="before")
    @classmethod
    def _split_values(cls, value):
        if isinstance(value, str):
            value = [int(v) for v in value.split(",") if v.strip()]
        return value

    @field_validator("n_values")
    @classmethod
    def _check_values(cls, value: list[int]) -> list[int]:
        if not value or any(n < 1 for n in value):
            raise ValueError("n_values must be a non-empty list of cutoffs >= 1")
        return value


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    basis: Basis = Basis.ITEM
    variant: Variant = Variant.GEMRANK_MLP
    seed: int = 0
    out_dir: Path = Path("gemrank_out")
    threads: int = Field(default=1, ge=1)
    data: DataConfig = Field(default_factory=DataConfig)
    split: SplitConfig = Field(default_factory=SplitConfig)
    pco: PcoConfig = Field(default_factory=PcoConfig)
    embedding: EmbeddingConfig = Field(default_factory=EmbeddingConfig)
    profiles: ProfilesConfig = Field(default_factory=ProfilesConfig)
    mlp: MlpConfig = Field(default_factory=MlpConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)

    def pipeline_spec(self) -> PipelineSpec:
        return PipelineSpec(
            basis=self.basis,
            variant=self.variant,
            pco=self.pco,
            embedding=self.embedding,
            profiles=self.profiles,
            mlp=self.mlp,
        )


SECTIONS: dict[str, type[BaseModel]] = {
    "data": DataConfig,
    "split": SplitConfig,
    "pco": PcoConfig,
    "embedding": EmbeddingConfig,
    "profiles": ProfilesConfig,
    "mlp": MlpConfig,
    "eval": EvalConfig,
}
TOP_LEVEL_KEYS = ("basis", "variant", "seed", "out_dir", "threads")


def load_config_file(path: Path) -> dict[str, str]:
    """Read `key = value` lines; `#` starts a comment."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    values = dotenv_values(path)
    missing = [key for key, value in values.items() if value is None]
    if missing:
        raise ConfigError(f"{path}: keys without a value: {', '.join(missing)}")
    return {key: value for key, value in values.items() if value is not None}


def _nest(flat: dict[str, str]) -> dict[str, object]:
    nested: dict[str, object] = {}
    for key, value in flat.items():
        if key in TOP_LEVEL_KEYS:
            nested[key] = value
            continue
        section, _, field = key.partition(".")
        if section not in SECTIONS or field not in SECTIONS[section].model_fields:
            raise ConfigError(f"Unknown config key: {key}")
        nested.setdefault(section, {})[field] = value  # type: ignore[union-attr]
    return nested


def build_run_config(
    file_values: dict[str, str] | None = None, overrides: dict[str, object] | None = None
) -> RunConfig:
    """
    Merge defaults, config file values and command-line overrides, in that order.

    Args:
        file_values: Flat keys from load_config_file
        overrides: Flat keys from the command line; None values are ignored

    Returns:
        Validated run configuration
    """
    merged: dict[str, object] = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return RunConfig.model_validate(_nest(merged))  # type: ignore[arg-type]
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}") from e


def _format_value(value: object) -> str:
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    if isinstance(value, bool):
        return str(value).lower()
    return str(value)


def flatten(config: RunConfig) -> dict[str, str]:
    """Flat `section.field -> text` view of a config, readable by load_config_file."""
    flat = {key: _format_value(getattr(config, key)) for key in TOP_LEVEL_KEYS}
    for section in SECTIONS:
        model = getattr(config, section)
        for field in type(model).model_fields:
            flat[f"{section}.{field}"] = _format_value(getattr(model, field))
    delimiter = config.data.delimiter
    flat["data.delimiter"] = _DELIMITER_TEXT.get(delimiter, delimiter)
    return flat


def write_effective_config(config: RunConfig, out_dir: Path | None = None) -> Path:
    """Echo the effective configuration, sorted by key, into the output directory."""
    out_dir = Path(out_dir or config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / EFFECTIVE_CONFIG_FILE
    lines = [f"{key} = {value}" for key, value in sorted(flatten(config).items())]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.debug(f"Effective config written to {path}")
    return path
