"""Model backends: deterministic stand-ins behind the two endpoints.

The embedding backend hashes tokens into a signed fixed-width vector;
the chat backend recognizes the table-editing instructions by their
wording and rewrites the JSON table it finds in the prompt. Both are
fully deterministic so integration tests can assert exact behavior.
Real models plug in by adding entries to the registries below.
"""

from __future__ import annotations

import hashlib
import json
import re
from typing import Sequence

import numpy as np


class BackendError(RuntimeError):
    """A backend could not produce a result."""


_TOKEN_RE = re.compile(r"[a-z0-9]+")


class HashEmbedBackend:
    """Signed token-hashing sentence encoder with unit-norm output."""

    def __init__(self, name: str, dimension: int) -> None:
        self.name = name
        self.dimension = dimension
        self.batch_calls = 0

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        self.batch_calls += 1
        out = np.zeros((len(texts), self.dimension), dtype=np.float64)
        for i, text in enumerate(texts):
            for token in _TOKEN_RE.findall(text.lower()):
                digest = hashlib.sha256(
                    f"{self.name}|{token}".encode("utf-8")
                ).digest()
                index = int.from_bytes(digest[:4], "big") % self.dimension
                sign = 1.0 if digest[4] & 1 else -1.0
                out[i, index] += sign
            norm = float(np.linalg.norm(out[i]))
            if norm > 0.0:
                out[i] /= norm
        return out


class FailingEmbedBackend:
    """Simulates a model that loads but crashes on every request."""

    def __init__(self, name: str) -> None:
        self.name = name
        self.dimension = 8
        self.batch_calls = 0

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        self.batch_calls += 1
        raise BackendError(f"embedding model {self.name!r} crashed")


def _extract_json_object(text: str) -> dict | None:
    """First balanced top-level JSON object in ``text``, if any."""
    start = text.find("{")
    while start != -1:
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    try:
                        obj = json.loads(text[start : i + 1])
                    except json.JSONDecodeError:
                        break
                    return obj if isinstance(obj, dict) else None
        start = text.find("{", start + 1)
    return None


def _is_number(cell: str) -> bool:
    cell = cell.strip().replace(",", "")
    if not cell:
        return False
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _column_is_numeric(rows: list[list[str]], j: int) -> bool:
    values = [r[j] for r in rows if str(r[j]).strip()]
    return bool(values) and all(_is_number(str(v)) for v in values)


def _triple(cell: str) -> str:
    raw = str(cell).strip().replace(",", "")
    if not raw:
        return ""
    try:
        return str(3 * int(raw))
    except ValueError:
        pass
    try:
        return str(3.0 * float(raw))
    except ValueError:
        return ""


def _fresh_name(candidate: str, taken: Sequence[str]) -> str:
    name = candidate
    while name in taken:
        name += "_b"
    return name


class RuleChatBackend:
    """Deterministic table editor keyed on the instruction wording.

    Understands the five request kinds the generation pipeline sends:
    a description request plus the concatenation, edit, calculation,
    and update instructions. Anything else echoes the table back.
    """

    def __init__(self, name: str) -> None:
        self.name = name

    def complete(
        self,
        messages: Sequence[dict],
        temperature: float,
        max_tokens: int,
    ) -> str:
        prompt = ""
        for message in messages:
            if message.get("role") == "user":
                prompt = str(message.get("content", ""))
        table = _extract_json_object(prompt)
        if "brief description" in prompt:
            return self._describe(table)
        if table is None:
            return "{}"
        rows = [
            [str(c) for c in row] for row in table.get("cell_data", [])
        ]
        cols = [str(c) for c in table.get("column_names", [])]
        title = str(table.get("title", ""))
        description = str(table.get("description", ""))
        if "Make up two new columns" in prompt:
            return self._concatenate(rows, cols, title, description)
        if "binning" in prompt:
            return self._edit(rows, cols, title, description)
        if "type of calculation" in prompt:
            return self._calculate(rows, cols, title, description)
        if "Update title, column names, and description" in prompt:
            return self._update(rows, cols, title)
        return json.dumps(table, ensure_ascii=False)

    @staticmethod
    def _payload(rows, cols, description, title) -> str:
        return json.dumps(
            {
                "cell_data": rows,
                "description": description,
                "title": title,
                "column_names": cols,
            },
            ensure_ascii=False,
        )

    @staticmethod
    def _describe(table: dict | None) -> str:
        if not table:
            return "A small tabular dataset."
        title = str(table.get("title", "")) or "This table"
        cols = ", ".join(str(c) for c in table.get("column_names", []))
        return (
            f"{title} lists values across the fields {cols}. "
            "It supports quick lookups and comparisons."
        )

    def _concatenate(self, rows, cols, title, description) -> str:
        code_col = _fresh_name("memo_code", cols)
        flag_col = _fresh_name("memo_flag", cols + [code_col])
        new_rows = [
            row + [f"m{i}", "yes" if i % 2 == 0 else "no"]
            for i, row in enumerate(rows)
        ]
        return self._payload(
            new_rows, cols + [code_col, flag_col], description, title
        )

    def _edit(self, rows, cols, title, description) -> str:
        target = 0
        for j in range(len(cols)):
            if not _column_is_numeric(rows, j):
                target = j
                break
        new_col = _fresh_name(f"{cols[target]}_reversed", cols)
        new_rows = [row + [row[target][::-1]] for row in rows]
        return self._payload(new_rows, cols + [new_col], description, title)

    def _calculate(self, rows, cols, title, description) -> str:
        target = 0
        for j in range(len(cols)):
            if _column_is_numeric(rows, j):
                target = j
                break
        new_col = _fresh_name(f"{cols[target]}_x3", cols)
        new_rows = [row + [_triple(row[target])] for row in rows]
        return self._payload(new_rows, cols + [new_col], description, title)

    def _update(self, rows, cols, title) -> str:
        new_title = f"Revised: {title}" if title else "Revised table"
        new_description = (
            f"Refreshed figures for {title or 'this table'} across "
            f"{len(cols)} columns."
        )
        return self._payload(rows, cols, new_description, new_title)


class FailingChatBackend:
    """Simulates a chat model that loads but crashes on every request."""

    def __init__(self, name: str) -> None:
        self.name = name

    def complete(self, messages, temperature, max_tokens) -> str:
        raise BackendError(f"chat model {self.name!r} crashed")


EMBED_MODELS: dict[str, int] = {
    "hash-64": 64,
    "hash-256": 256,
    "hash-1024": 1024,
}


def resolve_embed_backend(name: str):
    if name == "always-fail":
        return FailingEmbedBackend(name)
    dimension = EMBED_MODELS.get(name)
    if dimension is None:
        raise BackendError(f"unknown embedding model {name!r}")
    return HashEmbedBackend(name, dimension)


def resolve_chat_backend(name: str):
    if name == "always-fail":
        return FailingChatBackend(name)
    if name == "rule-chat":
        return RuleChatBackend(name)
    raise BackendError(f"unknown chat model {name!r}")
