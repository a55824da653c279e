"""Run records: provenance JSON written next to every output."""
import datetime as dt
import json
import logging
from pathlib import Path
from typing import Any, Dict

from ..core.exceptions import ConfigurationError
from ..core.models import SCHEMA_VERSION, RunRecord

logger = logging.getLogger(__name__)


def utc_timestamp() -> str:
    return dt.datetime.now(dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def make_record(command: str, config: Dict[str, Any], results: Dict[str, Any]) -> RunRecord:
    from .. import __version__

    return RunRecord(
        command=command,
        config=config,
        results=results,
        tool_version=__version__,
        timestamp=utc_timestamp(),
    )


def record_path(output_dir: Path, command: str) -> Path:
    return Path(output_dir) / f"{command}-record.json"


def save_record(record: RunRecord, path: Path) -> Path:
    """Write the record atomically (temp file, then rename)."""
    path = Path(path)
    temp_file = path.with_suffix(".tmp")
    with open(temp_file, "w", encoding="utf-8") as f:
        json.dump(record.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    temp_file.replace(path)
    logger.info(f"Run record written to {path}")
    return path


def load_record(path: Path) -> RunRecord:
    """Read a record written by save_record."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"Failed to read run record {path}: {e}")
    if not isinstance(data, dict):
        raise ConfigurationError(f"Run record {path} must hold a JSON object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigurationError(f"Unsupported run record schema {version!r} (expected {SCHEMA_VERSION})")
    try:
        return RunRecord.from_dict(data)
    except TypeError as e:
        raise ConfigurationError(f"Malformed run record {path}: {e}")
