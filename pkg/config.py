"""
Centralized configuration module for the GEMRank toolkit.

This module provides a single source of truth for environment-driven settings and
the experiment constants shared by the pipeline stages.
"""

import os

from dotenv import load_dotenv

# Load environment variables
load_dotenv(override=True)

GEMRANK_DATA_DIR = ""
DEFAULT_RATINGS_FILE = "u.data"
GEMRANK_LOG_TARGET = "gemrank.log"
GEMRANK_LOG_LEVEL = "INFO"


def read_environment() -> None:
    """Refresh the GEMRANK_* settings from os.environ, e.g. after another .env is loaded."""
    global GEMRANK_DATA_DIR, DEFAULT_RATINGS_FILE, GEMRANK_LOG_TARGET, GEMRANK_LOG_LEVEL
    # Data location
    GEMRANK_DATA_DIR = os.getenv("GEMRANK_DATA_DIR", "").strip('"')
    DEFAULT_RATINGS_FILE = os.getenv("GEMRANK_RATINGS_FILE", "u.data").strip('"')
    # Logging
    GEMRANK_LOG_TARGET = os.getenv("GEMRANK_LOG_TARGET", "gemrank.log").strip('"')
    GEMRANK_LOG_LEVEL = os.getenv("GEMRANK_LOG_LEVEL", "INFO").upper()


read_environment()

# MovieLens ratings are integer grades 1..5
MOVIELENS_R_MAX = 5

# Experiment grid
UPL_VALUES = (10, 20, 50)
TABLE_LABELS = ("item-based", "user-based", "simple", "user-item")
NDCG_CUTOFFS = (5, 10)
HIDDEN_CANDIDATES = (5, 10, 15, 20, 25)
DEFAULT_REPETITIONS = 5

# Artifact file names inside the output directory
TRAIN_FILE = "train.tsv"
TEST_FILE = "test.tsv"
USER_INDEX_FILE = "users.tsv"
ITEM_INDEX_FILE = "items.tsv"
PCO_FILE = "pco.tsv"
TARGET_VECTORS_FILE = "target_vectors.txt"
CONTEXT_VECTORS_FILE = "context_vectors.txt"
USER_VECTORS_FILE = "user_vectors.txt"
ITEM_VECTORS_FILE = "item_vectors.txt"
MODEL_FILE = "mlp_model.txt"
SELECTION_FILE = "selection.tsv"
REPORT_TABLE_FILE = "report.txt"
REPORT_DATA_FILE = "report.tsv"
EFFECTIVE_CONFIG_FILE = "config.effective"

# Published NDCG@5 / NDCG@10 means on MovieLens-100K, for side-by-side display only.
REFERENCE_NDCG_ML100K: dict[int, dict[str, tuple[float, float]]] = {
    10: {
        "GEMRank (item-based)": (0.676, 0.692),
        "GEMRank (user-based)": (0.624, 0.654),
        "SibRank": (0.622, 0.650),
        "GRank": (0.595, 0.632),
        "ListRank": (0.672, 0.693),
        "CofiRank": (0.602, 0.631),
        "push-inf": (0.611, 0.640),
        "push-reverse": (0.594, 0.623),
        "push-p": (0.519, 0.561),
    },
    20: {
        "GEMRank (item-based)": (0.695, 0.699),
        "GEMRank (user-based)": (0.615, 0.642),
        "SibRank": (0.660, 0.672),
        "GRank": (0.642, 0.657),
        "ListRank": (0.682, 0.691),
        "CofiRank": (0.603, 0.620),
        "push-inf": (0.629, 0.647),
        "push-reverse": (0.621, 0.640),
        "push-p": (0.580, 0.602),
    },
    50: {
        "GEMRank (item-based)": (0.713, 0.715),
        "GEMRank (user-based)": (0.602, 0.629),
        "SibRank": (0.711, 0.710),
        "GRank": (0.719, 0.717),
        "ListRank": (0.687, 0.684),
        "CofiRank": (0.609, 0.616),
        "push-inf": (0.658, 0.667),
        "push-reverse": (0.664, 0.668),
        "push-p": (0.681, 0.679),
    },
}
