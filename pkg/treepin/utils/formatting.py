"""Formatting utilities."""
import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

from slugify import slugify

from ..core.models import ModelSpec


def format_number(value: Optional[float]) -> str:
    """17 significant digits, locale independent; blank for a missing value."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, ".17g")


def format_cell(value: Any) -> str:
    if value is None or isinstance(value, (int, float)):
        return format_number(value)
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


def model_label(model: ModelSpec) -> str:
    """Short human-readable description used in tables and file names."""
    bulk = model.bulk
    law = bulk.kind if bulk.kind != "shifted" else f"shifted-{bulk.base.kind}"
    return f"d{model.d} d1 {model.d1} {law} {model.defect_kind.replace('_', ' ')}"


def output_filename(command: str, model: Optional[ModelSpec] = None, suffix: str = "", ext: str = "csv") -> str:
    """Generate a safe filename for a command's output."""
    parts = [command]
    if model is not None:
        parts.append(model_label(model))
    if suffix:
        parts.append(suffix)
    return f"{slugify(' '.join(parts))}.{ext}"


def ensure_output_dir(output_dir: str) -> Path:
    """Ensure output directory exists and return Path object."""
    path = Path(output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Dict[str, Any]]) -> Path:
    """Write rows as CSV with fixed column order and Unix line endings."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_cell(row.get(col)) for col in columns])
    return path


def write_json(path: Path, payload: Any) -> Path:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def write_table(path: Path, columns: Sequence[str], rows: List[Dict[str, Any]], fmt: str) -> Path:
    """Write rows in the requested format ('csv' or 'json')."""
    if fmt == "json":
        return write_json(path.with_suffix(".json"), [{c: row.get(c) for c in columns} for row in rows])
    return write_csv(path, columns, rows)
