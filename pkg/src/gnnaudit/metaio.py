"""CSV files with a `# meta` JSON header line.

All tabular artifacts (posteriors, audit records, analysis outputs) share
this convention so every file carries the context needed to reproduce it.
"""

from __future__ import annotations

import json
from pathlib import Path

__all__ = ["write_csv", "read_csv"]


def write_csv(path, columns: list[str], rows, meta: dict | None = None) -> None:
    lines = []
    if meta is not None:
        lines.append("# meta " + json.dumps(meta, sort_keys=True, separators=(",", ":")))
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def read_csv(path) -> tuple[dict, list[str], list[list[str]]]:
    meta: dict = {}
    header: list[str] | None = None
    rows: list[list[str]] = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        if line.startswith("# meta "):
            meta = json.loads(line[len("# meta "):])
            continue
        if line.startswith("#"):
            continue
        if header is None:
            header = line.split(",")
        else:
            rows.append(line.split(","))
    if header is None:
        raise ValueError(f"{path} has no header row")
    return meta, header, rows
