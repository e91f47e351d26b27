"""Append-only JSON-lines event stores with crash-safe replay.

Each store is a single file, one JSON object per line. Loading skips a
corrupt final line (interrupted write) with a recorded warning; corrupt
lines elsewhere are reported too but never abort replay.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

__all__ = ["JsonlStore"]


class JsonlStore:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.warnings: list[str] = []

    def append(self, event: dict, fsync: bool = False):
        line = json.dumps(event, sort_keys=True, separators=(",", ":"))
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            if fsync:
                os.fsync(fh.fileno())

    def load(self) -> list[dict]:
        """Replay all events; corrupt lines are skipped with a warning."""
        self.warnings = []
        if not self.path.exists():
            return []
        events = []
        lines = self.path.read_text(encoding="utf-8").splitlines()
        for i, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                events.append(json.loads(line))
            except json.JSONDecodeError:
                where = "final" if i == len(lines) - 1 else f"line {i + 1}"
                self.warnings.append(
                    f"{self.path.name}: skipped corrupt {where} record"
                )
        return events
