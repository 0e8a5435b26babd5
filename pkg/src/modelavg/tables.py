"""Tabular experiment output with a provenance header.

Every emitted CSV begins with commented ``# key=value`` lines (tool version,
seed, config hash when available) followed by a header row.  Floats are
written with 17 significant digits so files round-trip doubles exactly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field


def config_hash(config) -> str:
    """Stable sha256 of a JSON-serializable configuration."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


@dataclass
class ResultTable:
    columns: tuple
    rows: list
    meta: dict = field(default_factory=dict)

    def column(self, name):
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    def to_csv_text(self, version: str = "") -> str:
        lines = []
        meta = dict(self.meta)
        if version:
            meta.setdefault("tool_version", version)
        for key in sorted(meta):
            lines.append(f"# {key}={_fmt(meta[key])}")
        lines.append(",".join(self.columns))
        for row in self.rows:
            lines.append(",".join(_fmt(v) for v in row))
        return "\n".join(lines) + "\n"

    def to_csv(self, path, version: str = "") -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(self.to_csv_text(version))
