"""CSV tables with a commented metadata header.

    # key: value
    # key: value
    col_a,col_b
    1,0.5
"""
import csv
import logging
import os
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

logger = logging.getLogger(__name__)


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".12g")
    if hasattr(value, "item"):
        return format_value(value.item())
    return str(value)


def write_table(path: str, columns: Sequence[str], rows: Iterable[Sequence[Any]],
                metadata: Optional[Mapping[str, Any]] = None) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as handle:
        for key, value in (metadata or {}).items():
            handle.write(f"# {key}: {format_value(value)}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"Row {row} does not match columns {list(columns)}")
            writer.writerow([format_value(v) for v in row])
            count += 1
    logger.debug(f"Wrote {count} rows to {path}")
    return path


def read_table(path: str) -> Tuple[Dict[str, str], List[Dict[str, str]]]:
    """Returns (metadata, rows) with every value as text."""
    metadata: Dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            metadata[key] = value
        elif line:
            body.append(line)
    return metadata, list(csv.DictReader(body))
