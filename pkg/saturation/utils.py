"""
Utility functions: logging setup, JSON/TOML/CSV file I/O, config hashing.
"""
import csv
import hashlib
import io
import json
import logging
import os
import tempfile
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

logger = logging.getLogger(__name__)


def configure_logging(level: str = "INFO") -> None:
    """Configure root logging once for command-line runs."""
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO), format=LOG_FORMAT)


def get_logger(name: str) -> logging.Logger:
    """Get a configured logger."""
    return logging.getLogger(name)


def _atomic_write(text: str, filepath: str) -> None:
    output_path = Path(filepath)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=output_path.parent, prefix=f".{output_path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_name, output_path)
    except Exception:
        Path(tmp_name).unlink(missing_ok=True)
        raise


def save_json(data: dict, filepath: str) -> None:
    """
    Save a dictionary as JSON with pretty formatting.

    The file is written to a temporary sibling first and renamed into place,
    so readers never observe a half-written report.

    Args:
        data: Dictionary to save
        filepath: Path to output JSON file
    """
    try:
        _atomic_write(json.dumps(data, indent=2, allow_nan=False) + "\n", filepath)
        logger.info(f"Saved JSON to {filepath}")
    except Exception as e:
        logger.error(f"Failed to save JSON to {filepath}: {e}")
        raise


def load_json(filepath: str) -> dict:
    """
    Load JSON from file.

    Args:
        filepath: Path to JSON file

    Returns:
        Loaded dictionary
    """
    try:
        with open(filepath, "r", encoding="utf-8") as f:
            return json.load(f)
    except Exception as e:
        logger.error(f"Failed to load JSON from {filepath}: {e}")
        raise


def load_structured(filepath: str) -> dict:
    """Load a JSON or TOML document, chosen by file suffix."""
    path = Path(filepath)
    if path.suffix.lower() == ".toml":
        try:
            with open(path, "rb") as f:
                return tomllib.load(f)
        except Exception as e:
            logger.error(f"Failed to load TOML from {filepath}: {e}")
            raise
    return load_json(filepath)


def format_value(value: Any) -> str:
    """Render one CSV cell; floats use the shortest round-trip representation."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def render_csv(
    rows: Iterable[Dict[str, Any]],
    columns: Sequence[str],
    header_lines: Optional[List[str]] = None,
) -> str:
    """
    Render rows as CSV text.

    Args:
        rows: Mappings keyed by column name
        columns: Column order for the header row
        header_lines: Optional ``key=value`` strings emitted as ``#`` comments

    Returns:
        CSV document as a string (UTF-8 safe, ``\\n`` line endings)
    """
    buffer = io.StringIO()
    for line in header_lines or []:
        buffer.write(f"# {line}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(col)) for col in columns])
    return buffer.getvalue()


def save_csv(
    rows: Iterable[Dict[str, Any]],
    columns: Sequence[str],
    filepath: str,
    header_lines: Optional[List[str]] = None,
) -> None:
    """Save rows as CSV (atomic replace)."""
    try:
        _atomic_write(render_csv(rows, columns, header_lines), filepath)
        logger.info(f"Saved CSV to {filepath}")
    except Exception as e:
        logger.error(f"Failed to save CSV to {filepath}: {e}")
        raise


def config_digest(data: dict) -> str:
    """SHA-256 of the canonical JSON encoding of ``data``."""
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
