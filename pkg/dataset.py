"""
Rating log ingestion, dense indexing and UPL train/test splitting.

The log is a delimiter-separated text file with fields user, item, rating and an
optional timestamp (MovieLens `u.data` layout). Timestamps are parsed and dropped.
"""

import logging
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from config import ITEM_INDEX_FILE, MOVIELENS_R_MAX, TEST_FILE, TRAIN_FILE, USER_INDEX_FILE
from errors import ArtifactError, RatingParseError, SplitError

logger = logging.getLogger(__name__)


class RatingRecord(BaseModel):
    user_id: str = Field(description="External user identifier")
    item_id: str = Field(description="External item identifier")
    rating: int = Field(ge=1, description="Integer grade in [1, r_max]")
    timestamp: int | None = Field(default=None, description="Seconds; parsed, then ignored")


class SplitConfig(BaseModel):
    upl: int = Field(default=50, ge=1, description="Ratings kept per user for training")
    min_test_items: int = Field(default=10, ge=1, description="Held-out ratings required")
    seed: int = Field(default=0, description="Seed for train rating selection")


@dataclass(frozen=True)
class Dataset:
    num_users: int
    num_items: int
    ratings: list[tuple[int, int, int]]
    user_profiles: list[list[tuple[int, int]]]
    item_profiles: list[list[tuple[int, int]]]
    r_max: int = MOVIELENS_R_MAX
    user_ids: list[str] = field(default_factory=list)
    item_ids: list[str] = field(default_factory=list)

    @classmethod
    def from_triples(
        cls,
        num_users: int,
        num_items: int,
        triples: Iterable[tuple[int, int, int]],
        r_max: int = MOVIELENS_R_MAX,
        user_ids: list[str] | None = None,
        item_ids: list[str] | None = None,
    ) -> "Dataset":
        """Build a dataset and both profile views from (user, item, rating) triples."""
        ratings = list(triples)
        user_profiles: list[list[tuple[int, int]]] = [[] for _ in range(num_users)]
        item_profiles: list[list[tuple[int, int]]] = [[] for _ in range(num_items)]
        for user, item, rating in ratings:
            if not (0 <= user < num_users and 0 <= item < num_items):
                raise IndexError(f"Rating ({user}, {item}) outside {num_users}x{num_items}")
            user_profiles[user].append((item, rating))
            item_profiles[item].append((user, rating))

        return cls(
            num_users=num_users,
            num_items=num_items,
            ratings=ratings,
            user_profiles=user_profiles,
            item_profiles=item_profiles,
            r_max=r_max,
            user_ids=user_ids if user_ids is not None else [str(u) for u in range(num_users)],
            item_ids=item_ids if item_ids is not None else [str(i) for i in range(num_items)],
        )


@dataclass(frozen=True)
class TrainTestSplit:
    train: Dataset
    test: list[list[tuple[int, int]]]
    included_users: list[int]
    upl: int

    def test_ratings(self, user: int) -> dict[int, int]:
        """Held-out ratings of one user as item -> rating."""
        return dict(self.test[user])


def parse_ratings(
    source: BinaryIO | Iterable[bytes],
    delimiter: str = "\t",
    r_max: int = MOVIELENS_R_MAX,
) -> list[RatingRecord]:
    """
    Parse a rating log.

    Args:
        source: Byte stream (or iterable of byte lines) in UTF-8
        delimiter: Field delimiter, tab for MovieLens-100K, "::" for MovieLens-1M
        r_max: Maximum valid rating

    Returns:
        Records in order of first (user, item) appearance; a repeated pair keeps the
        rating of its last occurrence
    """
    records: dict[tuple[str, str], RatingRecord] = {}

    for line_number, raw_line in enumerate(source, start=1):
        try:
            line = raw_line.decode("utf-8").rstrip("\r\n")
        except UnicodeDecodeError as e:
            raise RatingParseError(line_number, f"not valid UTF-8 ({e})") from e
        if not line.strip():
            continue

        fields = line.split(delimiter)
        if len(fields) not in (3, 4):
            raise RatingParseError(line_number, f"expected 3 or 4 fields, got {len(fields)}")

        user_id, item_id, rating_text = (f.strip() for f in fields[:3])
        if not user_id or not item_id:
            raise RatingParseError(line_number, "empty user or item identifier")
        try:
            rating = int(rating_text)
        except ValueError:
            raise RatingParseError(line_number, f"non-numeric rating {rating_text!r}") from None
        if not 1 <= rating <= r_max:
            raise RatingParseError(line_number, f"rating {rating} outside [1, {r_max}]")

        timestamp = None
        if len(fields) == 4 and fields[3].strip():
            try:
                timestamp = int(fields[3].strip())
            except ValueError:
                raise RatingParseError(
                    line_number, f"non-numeric timestamp {fields[3]!r}"
                ) from None

        records[(user_id, item_id)] = RatingRecord(
            user_id=user_id, item_id=item_id, rating=rating, timestamp=timestamp
        )

    return list(records.values())


def read_ratings(
    path: Path, delimiter: str = "\t", r_max: int = MOVIELENS_R_MAX
) -> list[RatingRecord]:
    """Parse a rating log file."""
    with open(path, "rb") as f:
        records = parse_ratings(f, delimiter=delimiter, r_max=r_max)
    logger.info(f"Parsed {len(records)} ratings from {path}")
    return records


def index_dataset(records: list[RatingRecord], r_max: int = MOVIELENS_R_MAX) -> Dataset:
    """
    Assign dense 0-based indices to users and items in order of first appearance.

    Args:
        records: Parsed, deduplicated rating records
        r_max: Maximum possible rating

    Returns:
        Indexed dataset with both profile views
    """
    if not records:
        raise ValueError("Cannot index an empty rating log")

    user_index: dict[str, int] = {}
    item_index: dict[str, int] = {}
    triples: list[tuple[int, int, int]] = []
    seen: set[tuple[int, int]] = set()

    for record in records:
        user = user_index.setdefault(record.user_id, len(user_index))
        item = item_index.setdefault(record.item_id, len(item_index))
        if (user, item) in seen:
            raise ValueError(f"Duplicate rating for user {record.user_id}, item {record.item_id}")
        seen.add((user, item))
        triples.append((user, item, record.rating))

    dataset = Dataset.from_triples(
        len(user_index),
        len(item_index),
        triples,
        r_max=r_max,
        user_ids=list(user_index),
        item_ids=list(item_index),
    )
    logger.info(
        f"Indexed {len(triples)} ratings: {dataset.num_users} users, {dataset.num_items} items"
    )
    return dataset


def split_upl(dataset: Dataset, config: SplitConfig) -> TrainTestSplit:
    """
    Keep `upl` random ratings of each eligible user for training and hold out the rest.

    A user is eligible when they have at least upl + min_test_items ratings. Users are
    visited in index order with a single seeded generator, so the split is a pure
    function of (dataset, config).

    Args:
        dataset: Indexed dataset
        config: UPL, minimum test size and seed

    Returns:
        The train dataset (same index spaces as the input) and per-user test ratings
    """
    rng = np.random.default_rng(config.seed)
    required = config.upl + config.min_test_items

    train_triples: list[tuple[int, int, int]] = []
    test: list[list[tuple[int, int]]] = [[] for _ in range(dataset.num_users)]
    included: list[int] = []

    for user, profile in enumerate(dataset.user_profiles):
        if len(profile) < required:
            continue
        chosen = np.zeros(len(profile), dtype=bool)
        chosen[rng.choice(len(profile), size=config.upl, replace=False)] = True
        for position, (item, rating) in enumerate(profile):
            if chosen[position]:
                train_triples.append((user, item, rating))
            else:
                test[user].append((item, rating))
        included.append(user)

    if not included:
        raise SplitError(
            f"No user has at least {required} ratings (upl={config.upl}, "
            f"min_test_items={config.min_test_items})"
        )

    train = Dataset.from_triples(
        dataset.num_users,
        dataset.num_items,
        train_triples,
        r_max=dataset.r_max,
        user_ids=dataset.user_ids,
        item_ids=dataset.item_ids,
    )
    logger.info(
        f"UPL={config.upl} split: {len(included)}/{dataset.num_users} users included, "
        f"{len(train_triples)} train ratings"
    )
    return TrainTestSplit(train=train, test=test, included_users=included, upl=config.upl)


def dump_split(split: TrainTestSplit, out_dir: Path) -> None:
    """Write train.tsv / test.tsv (external ids, no timestamp) and the index maps."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train = split.train

    pd.DataFrame(
        [(train.user_ids[u], train.item_ids[i], r) for u, i, r in train.ratings]
    ).to_csv(out_dir / TRAIN_FILE, sep="\t", header=False, index=False)
    pd.DataFrame(
        [
            (train.user_ids[u], train.item_ids[i], r)
            for u in split.included_users
            for i, r in split.test[u]
        ]
    ).to_csv(out_dir / TEST_FILE, sep="\t", header=False, index=False)
    pd.DataFrame(enumerate(train.user_ids)).to_csv(
        out_dir / USER_INDEX_FILE, sep="\t", header=False, index=False
    )
    pd.DataFrame(enumerate(train.item_ids)).to_csv(
        out_dir / ITEM_INDEX_FILE, sep="\t", header=False, index=False
    )


def _read_index_map(path: Path) -> list[str]:
    if not path.is_file():
        raise ArtifactError(f"Index map not found: {path}")
    frame = pd.read_csv(path, sep="\t", header=None, dtype=str, keep_default_na=False)
    ids = [""] * len(frame)
    for index, external_id in zip(frame[0].astype(int), frame[1]):
        ids[index] = external_id
    return ids


def _read_triples(path: Path, user_index: dict[str, int], item_index: dict[str, int]):
    if not path.is_file():
        raise ArtifactError(f"Split file not found: {path}")
    try:
        frame = pd.read_csv(path, sep="\t", header=None, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        return []
    try:
        return [
            (user_index[u], item_index[i], int(r)) for u, i, r in frame.itertuples(index=False)
        ]
    except KeyError as e:
        raise ArtifactError(f"{path}: id {e} missing from the index maps") from None


def load_split(out_dir: Path, r_max: int = MOVIELENS_R_MAX) -> TrainTestSplit:
    """Reload a split written by dump_split."""
    out_dir = Path(out_dir)
    user_ids = _read_index_map(out_dir / USER_INDEX_FILE)
    item_ids = _read_index_map(out_dir / ITEM_INDEX_FILE)
    user_index = {u: k for k, u in enumerate(user_ids)}
    item_index = {i: k for k, i in enumerate(item_ids)}

    train = Dataset.from_triples(
        len(user_ids),
        len(item_ids),
        _read_triples(out_dir / TRAIN_FILE, user_index, item_index),
        r_max=r_max,
        user_ids=user_ids,
        item_ids=item_ids,
    )
    test: list[list[tuple[int, int]]] = [[] for _ in range(len(user_ids))]
    for user, item, rating in _read_triples(out_dir / TEST_FILE, user_index, item_index):
        test[user].append((item, rating))

    included = [u for u, profile in enumerate(train.user_profiles) if profile]
    if not included:
        raise ArtifactError(f"{out_dir / TRAIN_FILE} holds no training ratings")
    upl = len(train.user_profiles[included[0]])
    return TrainTestSplit(train=train, test=test, included_users=included, upl=upl)
