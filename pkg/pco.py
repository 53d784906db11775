"""
Profile co-occurrence (PCO) matrix over the basic entity, and its smoothing function.

With items as the basic entity, P[i, j] counts the users whose training profile holds
both item i and item j. With users as the basic entity the roles are swapped and
P[u, v] counts the items rated by both users. The diagonal is never stored.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field
from scipy import sparse

from dataset import Dataset
from errors import ArtifactError

logger = logging.getLogger(__name__)

LogBase = Literal["e", "2"]


class Basis(str, Enum):
    ITEM = "item"
    USER = "user"


class PcoConfig(BaseModel):
    log_base: LogBase = Field(default="e", description="Logarithm used by the smoothing")


@dataclass(frozen=True)
class PcoMatrix:
    n: int
    matrix: sparse.csr_matrix
    basis: Basis
    log_base: LogBase = "e"

    def __post_init__(self):
        if self.matrix.shape != (self.n, self.n):
            raise ValueError(f"PCO matrix shape {self.matrix.shape} does not match n={self.n}")

    @property
    def nnz(self) -> int:
        """Number of stored ordered pairs (both orientations)."""
        return int(self.matrix.nnz)

    def lookup(self, i: int, j: int) -> int:
        """Co-occurrence count of entities i and j (0 when absent)."""
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise IndexError(f"Pair ({i}, {j}) outside [0, {self.n})")
        return int(self.matrix[i, j])

    @property
    def entries(self) -> dict[tuple[int, int], int]:
        """Sparse map (i, j) -> count over both orientations."""
        rows, cols, counts = self.ordered_pairs()
        return {(int(i), int(j)): int(c) for i, j, c in zip(rows, cols, counts)}

    def ordered_pairs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Row indices, column indices and counts of every stored entry, row-major."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return (
            coo.row[order].astype(np.int64),
            coo.col[order].astype(np.int64),
            coo.data[order].astype(np.int64),
        )

    def upper_pairs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Entries with i < j, sorted lexicographically."""
        rows, cols, counts = self.ordered_pairs()
        upper = rows < cols
        return rows[upper], cols[upper], counts[upper]

    def smoothed_targets(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Ordered pairs with their regression targets f(P_ij)."""
        rows, cols, counts = self.ordered_pairs()
        return rows, cols, smooth_array(counts, self.log_base)

    def smoothed_dense(self) -> np.ndarray:
        """Dense n x n matrix of f(P_ij); absent pairs and the diagonal are 0."""
        dense = np.zeros((self.n, self.n), dtype=np.float64)
        rows, cols, targets = self.smoothed_targets()
        dense[rows, cols] = targets
        return dense


def smooth(x: float, log_base: LogBase = "e") -> float:
    """
    Smoothing applied to co-occurrence counts: log(x) above 1, identity otherwise.

    Args:
        x: Non-negative count
        log_base: "e" for the natural logarithm, "2" for base 2

    Returns:
        The smoothed value
    """
    if x < 0:
        raise ValueError(f"smooth expects a non-negative count, got {x}")
    if x > 1:
        return math.log(x) if log_base == "e" else math.log2(x)
    return float(x)


def smooth_array(counts: np.ndarray, log_base: LogBase = "e") -> np.ndarray:
    """Vectorized smooth over an array of counts."""
    counts = np.asarray(counts, dtype=np.float64)
    if np.any(counts < 0):
        raise ValueError("smooth expects non-negative counts")
    log = np.log if log_base == "e" else np.log2
    return np.where(counts > 1, log(np.maximum(counts, 1.0)), counts)


def incidence_matrix(dataset: Dataset) -> sparse.csr_matrix:
    """Binary users x items matrix of the rated pairs."""
    if dataset.ratings:
        users, items, _ = zip(*dataset.ratings)
    else:
        users, items = (), ()
    return sparse.csr_matrix(
        (
            np.ones(len(users), dtype=np.int64),
            (np.array(users, dtype=np.int64), np.array(items, dtype=np.int64)),
        ),
        shape=(dataset.num_users, dataset.num_items),
        dtype=np.int64,
    )


def build_pco(dataset: Dataset, basis: Basis, log_base: LogBase = "e") -> PcoMatrix:
    """
    Count profile co-occurrences over the basic entity.

    Args:
        dataset: Training ratings (only the profiles matter, ratings are ignored)
        basis: Basic entity, items or users
        log_base: Smoothing logarithm carried with the matrix

    Returns:
        Symmetric sparse count matrix without diagonal
    """
    incidence = incidence_matrix(dataset)
    if basis == Basis.ITEM:
        counts = (incidence.T @ incidence).tocsr()
    else:
        counts = (incidence @ incidence.T).tocsr()

    counts = (counts - sparse.diags(counts.diagonal(), dtype=np.int64)).tocsr()
    counts.eliminate_zeros()
    counts.sort_indices()

    pco = PcoMatrix(n=counts.shape[0], matrix=counts, basis=Basis(basis), log_base=log_base)
    logger.info(
        f"Built {pco.basis.value}-based PCO: n={pco.n}, {pco.nnz // 2} co-occurring pairs"
    )
    return pco


def dump_pco(pco: PcoMatrix, path: Path) -> None:
    """Write `i<TAB>j<TAB>count` lines for i < j, sorted lexicographically."""
    rows, cols, counts = pco.upper_pairs()
    pd.DataFrame({"i": rows, "j": cols, "count": counts}).to_csv(
        path, sep="\t", header=False, index=False
    )


def load_pco(path: Path, n: int, basis: Basis, log_base: LogBase = "e") -> PcoMatrix:
    """Reload a matrix written by dump_pco; n is the size of the basic entity space."""
    path = Path(path)
    if not path.is_file():
        raise ArtifactError(f"PCO file not found: {path}")
    try:
        frame = pd.read_csv(path, sep="\t", header=None, dtype=np.int64)
        rows, cols, counts = (frame[k].to_numpy() for k in range(3))
    except pd.errors.EmptyDataError:
        rows = cols = counts = np.zeros(0, dtype=np.int64)

    if np.any(rows >= cols) or np.any(counts < 1) or np.any(cols >= n):
        raise ArtifactError(f"{path}: entries must satisfy i < j < {n} and count >= 1")

    upper = sparse.coo_matrix((counts, (rows, cols)), shape=(n, n), dtype=np.int64)
    matrix = (upper + upper.T).tocsr()
    matrix.sort_indices()
    return PcoMatrix(n=n, matrix=matrix, basis=Basis(basis), log_base=log_base)
