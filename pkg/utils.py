import hashlib
from pathlib import Path

import numpy as np

from errors import ArtifactError


def derive_seed(seed: int, stage: str) -> int:
    """
    Derive the seed of one pipeline stage from the global run seed.

    Args:
        seed: The global run seed
        stage: Stage name, e.g. "split/0" or "mlp/3"

    Returns:
        A seed in [0, 2**32)
    """
    digest = hashlib.sha256(stage.encode("utf-8")).hexdigest()
    return (seed + int(digest[:8], 16)) % 2**32


def format_float(value: float) -> str:
    """Shortest decimal text that parses back to exactly the same double."""
    return repr(float(value))


def write_vectors(path: Path, vectors: np.ndarray) -> None:
    """
    Write a vector table as text: a `n dim` header, then `index v_0 ... v_{dim-1}` rows.

    Args:
        path: Destination file
        vectors: n x dim matrix
    """
    n, dim = vectors.shape
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{n} {dim}\n")
        for index, row in enumerate(vectors.tolist()):
            f.write(f"{index} " + " ".join(format_float(x) for x in row) + "\n")


def read_vectors(path: Path) -> np.ndarray:
    """Read a vector table written by write_vectors."""
    if not Path(path).is_file():
        raise ArtifactError(f"Vector file not found: {path}")

    with open(path, encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 2:
            raise ArtifactError(f"{path}: expected header 'n dim', got {header}")
        n, dim = int(header[0]), int(header[1])
        vectors = np.zeros((n, dim), dtype=np.float64)
        seen = 0
        for line in f:
            fields = line.split()
            if not fields:
                continue
            if len(fields) != dim + 1:
                raise ArtifactError(f"{path}: row {fields[:1]} has {len(fields) - 1} values")
            index = int(fields[0])
            if not 0 <= index < n:
                raise ArtifactError(f"{path}: row index {index} outside [0, {n})")
            vectors[index] = [float(x) for x in fields[1:]]
            seen += 1

    if seen != n:
        raise ArtifactError(f"{path}: expected {n} rows, found {seen}")
    return vectors
