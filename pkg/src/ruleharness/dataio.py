"""JSONL helpers for {source, target} pair files."""

from __future__ import annotations

import json
from pathlib import Path

from .errors import FormatError
from .types import Example


def write_pairs(examples, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps({"source": ex.source, "target": ex.target},
                                ensure_ascii=False) + "\n")


def read_pairs(path: str | Path, allow_empty_target: bool = False) -> list[Example]:
    out: list[Example] = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(lineno, f"invalid JSON: {exc}") from exc
        if "source" not in row or "target" not in row:
            raise FormatError(lineno, "row must have source and target fields")
        if not row["source"]:
            raise FormatError(lineno, "source must be non-empty")
        if not row["target"] and not allow_empty_target:
            raise FormatError(lineno, "target must be non-empty")
        out.append(Example(row["source"], row["target"]))
    return out
