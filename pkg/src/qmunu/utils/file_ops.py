"""File output utilities for reports, tables and figures."""

import csv
import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np


def to_jsonable(value: Any) -> Any:
    """
    Recursively converts library values into JSON-compatible objects.

    Fractions become "p/q" strings, complex numbers become {"re", "im"} pairs,
    numpy scalars and arrays become Python numbers and lists, and non-finite
    floats become the strings "inf", "-inf" or "nan".
    """
    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(item) for item in value.tolist()]
    if isinstance(value, np.generic):
        return to_jsonable(value.item())
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, complex):
        return {"re": to_jsonable(value.real), "im": to_jsonable(value.imag)}
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def write_json_file(output_dir: str, filename: str, data: Dict[str, Any]) -> Path:
    """
    Writes data to a JSON file with stable key order.

    Args:
        output_dir: The directory where the file should be written
        filename: The name of the file (without .json extension)
        data: The data dictionary to write

    Returns:
        Path to the written file
    """
    output_path = Path(output_dir)
    output_path.mkdir(parents=True, exist_ok=True)

    file_path = output_path / f"{filename}.json"
    with open(file_path, "w", encoding="utf-8") as f:
        json.dump(to_jsonable(data), f, indent=4, sort_keys=True, ensure_ascii=False)
        f.write("\n")

    return file_path


def write_csv_file(
    output_dir: str,
    filename: str,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    config_hash: str,
) -> Path:
    """
    Writes a CSV table whose first line records the config hash.

    Args:
        output_dir: The directory where the file should be written
        filename: The name of the file (without .csv extension)
        header: Column names
        rows: Row values, converted with to_jsonable
        config_hash: md5 of the run configuration

    Returns:
        Path to the written file
    """
    output_path = Path(output_dir)
    output_path.mkdir(parents=True, exist_ok=True)

    file_path = output_path / f"{filename}.csv"
    with open(file_path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(cell) for cell in row])

    return file_path


def _csv_cell(value: Any) -> Any:
    value = to_jsonable(value)
    if isinstance(value, float):
        return repr(value)
    return value


def read_csv_rows(file_path: Path) -> List[List[str]]:
    """Reads a CSV written by write_csv_file, skipping comment lines."""
    with open(file_path, "r", encoding="utf-8", newline="") as f:
        lines = [line for line in f if not line.startswith("#")]
    return list(csv.reader(lines))
