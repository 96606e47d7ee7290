"""File formats: JSONL datasets, pair records, negatives, split files.

Everything is line-oriented so corpora can stream; writes go through a
temp file and an atomic rename so an interrupted run never leaves a
half-written artifact behind.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .tables import Table, TableError, table_from_fields, write_table

PAIR_RELATION = "similar"


class DataFileError(ValueError):
    """A dataset file is missing fields or malformed."""


def read_jsonl(path: str | Path) -> Iterator[dict]:
    path = Path(path)
    with path.open("r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataFileError(f"{path}:{lineno}: invalid JSON: {e}")
            if not isinstance(obj, dict):
                raise DataFileError(f"{path}:{lineno}: not a JSON object")
            yield obj


def write_jsonl_atomic(path: str | Path, records: Iterable[dict]) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8") as f:
        for obj in records:
            f.write(json.dumps(obj, ensure_ascii=False))
            f.write("\n")
    os.replace(tmp, path)


def load_corpus(path: str | Path) -> list[Table]:
    """Read a table-per-line corpus, reporting the failing line number."""
    tables = []
    for lineno, obj in enumerate(read_jsonl(path), start=1):
        try:
            tables.append(table_from_fields(obj))
        except TableError as e:
            raise DataFileError(f"{path}:{lineno}: {e}") from e
    return tables


def write_corpus(path: str | Path, tables: Iterable[Table]) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8") as f:
        for t in tables:
            f.write(write_table(t))
            f.write("\n")
    os.replace(tmp, path)


@dataclass(frozen=True)
class PairRecord:
    """One anchor-target similarity pair plus how it was produced."""

    anchor_id: str
    target_id: str
    plan: tuple[str, ...]
    seed: int
    relation: str = PAIR_RELATION

    def to_dict(self) -> dict:
        return {
            "anchor_id": self.anchor_id,
            "target_id": self.target_id,
            "relation": self.relation,
            "plan": list(self.plan),
            "seed": self.seed,
        }


def read_pairs(path: str | Path) -> list[PairRecord]:
    pairs = []
    for lineno, obj in enumerate(read_jsonl(path), start=1):
        try:
            pairs.append(
                PairRecord(
                    anchor_id=obj["anchor_id"],
                    target_id=obj["target_id"],
                    plan=tuple(obj["plan"]),
                    seed=int(obj["seed"]),
                    relation=obj.get("relation", PAIR_RELATION),
                )
            )
        except (KeyError, TypeError, ValueError) as e:
            raise DataFileError(f"{path}:{lineno}: bad pair record: {e}")
    return pairs


def write_pairs(path: str | Path, pairs: Iterable[PairRecord]) -> None:
    write_jsonl_atomic(path, (p.to_dict() for p in pairs))


@dataclass(frozen=True)
class NegativesRecord:
    anchor_id: str
    positive_ids: tuple[str, ...]
    negative_ids: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "anchor_id": self.anchor_id,
            "positive_ids": list(self.positive_ids),
            "negative_ids": list(self.negative_ids),
        }


def read_negatives(path: str | Path) -> list[NegativesRecord]:
    records = []
    for lineno, obj in enumerate(read_jsonl(path), start=1):
        try:
            records.append(
                NegativesRecord(
                    anchor_id=obj["anchor_id"],
                    positive_ids=tuple(obj["positive_ids"]),
                    negative_ids=tuple(obj["negative_ids"]),
                )
            )
        except (KeyError, TypeError) as e:
            raise DataFileError(
                f"{path}:{lineno}: bad negatives record: {e}"
            )
    return records


def write_negatives(
    path: str | Path, records: Iterable[NegativesRecord]
) -> None:
    write_jsonl_atomic(path, (r.to_dict() for r in records))


def read_splits(path: str | Path) -> dict[str, list[str]]:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataFileError(f"{path}: invalid JSON: {e}")
    for key in ("train", "validation", "test"):
        if key not in obj or not isinstance(obj[key], list):
            raise DataFileError(f"{path}: missing list field {key!r}")
    return {
        "train": [str(x) for x in obj["train"]],
        "validation": [str(x) for x in obj["validation"]],
        "test": [str(x) for x in obj["test"]],
    }


def write_splits(path: str | Path, splits: dict[str, list[str]]) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(
        json.dumps(
            {
                "train": list(splits["train"]),
                "validation": list(splits["validation"]),
                "test": list(splits["test"]),
            },
            ensure_ascii=False,
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    os.replace(tmp, path)
