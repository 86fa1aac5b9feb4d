"""Structured key-value report files.

Reports are plain text with one ``key = value`` line per entry, sorted by
key so repeated runs diff cleanly; the generation timestamp is confined to
a single leading comment line.
"""

from __future__ import annotations

from datetime import datetime, timezone


def flatten(tree: dict, prefix: str = "") -> dict:
    out: dict = {}
    for key, val in tree.items():
        full = f"{prefix}.{key}" if prefix else str(key)
        if isinstance(val, dict):
            out.update(flatten(val, full))
        else:
            out[full] = val
    return out


def _format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def report_lines(data: dict) -> list:
    flat = flatten(data)
    return [f"{k} = {_format_value(flat[k])}" for k in sorted(flat)]


def write_report(data: dict, path, timestamp: bool = True) -> None:
    lines = []
    if timestamp:
        lines.append(f"# generated_at = {datetime.now(timezone.utc).isoformat()}")
    lines.extend(report_lines(data))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_report(path) -> dict:
    """Parse a report back into a flat {key: string} mapping."""
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition(" = ")
            out[key] = value
    return out
