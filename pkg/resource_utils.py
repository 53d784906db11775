"""
Utilities for locating the .env file and the rating data.
"""

import logging
import sys
from pathlib import Path

from dotenv import load_dotenv

import config
from errors import ConfigError

logger = logging.getLogger(__name__)


def get_resource_path(relative_path: str = "") -> Path:
    """
    Get the absolute path to a resource file, relative to the entry script.

    Args:
        relative_path: Path relative to the application root

    Returns:
        Absolute path to the resource
    """
    main_module = sys.modules.get("__main__")
    if main_module is not None and hasattr(main_module, "__file__"):
        base_path = Path(main_module.__file__).resolve().parent  # type: ignore[arg-type]
    else:
        base_path = Path.cwd()

    return base_path / relative_path if relative_path else base_path


def load_env_file() -> bool:
    """
    Load environment variables from a .env file next to the entry script, falling back
    to the current working directory, and refresh the settings in `config`.

    Returns:
        True if a .env file was loaded, False otherwise
    """
    env_path = get_resource_path(".env")

    if env_path.exists():
        result = load_dotenv(env_path, override=True)
        config.read_environment()
        if result:
            logger.info(f"Loaded .env from: {env_path}")
        else:
            logger.warning(f"Failed to load .env from: {env_path}")
        return result

    logger.debug(f".env not found at: {env_path}, trying current directory...")
    result = load_dotenv(override=True)
    config.read_environment()
    return result


def resolve_data_path(path: str | Path | None) -> Path:
    """
    Resolve the rating file to read.

    An existing path is used as is. Otherwise the name is looked up under
    GEMRANK_DATA_DIR; with no path at all, GEMRANK_DATA_DIR/DEFAULT_RATINGS_FILE is used.

    Args:
        path: Configured dataset path, possibly empty

    Returns:
        Path of an existing rating file
    """
    candidates: list[Path] = []
    if path:
        candidates.append(Path(path))
        if config.GEMRANK_DATA_DIR:
            candidates.append(Path(config.GEMRANK_DATA_DIR) / Path(path).name)
    elif config.GEMRANK_DATA_DIR:
        candidates.append(Path(config.GEMRANK_DATA_DIR) / config.DEFAULT_RATINGS_FILE)

    for candidate in candidates:
        if candidate.is_file():
            return candidate

    if not candidates:
        raise ConfigError("No dataset path configured and GEMRANK_DATA_DIR is not set")
    raise ConfigError(f"Rating file not found; tried {', '.join(str(c) for c in candidates)}")
