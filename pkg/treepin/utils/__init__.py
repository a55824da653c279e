"""Utility functions and helpers."""

from .rng import mix, replica_seed, cell_seed, uniforms
from .formatting import format_number, ensure_output_dir, output_filename, write_csv
from .cache import critical_cache
from .records import save_record, load_record, make_record

__all__ = [
    "mix", "replica_seed", "cell_seed", "uniforms",
    "format_number", "ensure_output_dir", "output_filename", "write_csv",
    "critical_cache", "save_record", "load_record", "make_record",
]
