"""Table serializers.

Two textual views of a table exist for two different consumers:

* a JSON view sent to the chat model, carrying a small sample of rows so
  prompts stay cheap regardless of table height;
* a flat text view fed to embedding models, with an optional variant that
  drops the cells entirely and keeps only title, description, and column
  names.
"""

from __future__ import annotations

import json
import random

from .tables import Table

DEFAULT_TOKEN_CAP = 512
LLM_SAMPLE_ROWS = 2


def sample_row_indices(t: Table, k: int, seed: int) -> list[int]:
    """Pick ``min(k, n_rows)`` distinct row indices, returned ascending.

    The draw is without replacement and fully determined by ``seed``.
    """
    n = t.n_rows
    k = min(k, n)
    rng = random.Random(seed)
    return sorted(rng.sample(range(n), k))


def to_llm_json(t: Table, seed: int, n_rows: int = LLM_SAMPLE_ROWS) -> str:
    """Render the JSON object shown to the chat model.

    Only a seeded sample of ``n_rows`` rows is included. Key order is
    fixed: cell_data, description, title, column_names.
    """
    idx = sample_row_indices(t, n_rows, seed)
    obj = {
        "cell_data": [list(t.rows[i]) for i in idx],
        "description": t.description,
        "title": t.title,
        "column_names": list(t.column_names),
    }
    return json.dumps(obj, ensure_ascii=False)


def to_embedding_text(t: Table, seed: int, blank_cells: bool = False) -> str:
    """Render the flat text view fed to embedding models.

    Default form: title, then column names, then the cells of one seeded
    random row, each group separated by ". " and items within a group by
    ", ". With ``blank_cells`` the description is kept and the cell group
    is left empty, so the text ends with a dangling ". ".
    """
    cols = ", ".join(t.column_names)
    if blank_cells:
        return t.title + ". " + t.description + ". " + cols + ". " + ""
    rng = random.Random(seed)
    row = t.rows[rng.randrange(t.n_rows)] if t.n_rows else ()
    cells = ", ".join(row)
    return t.title + ". " + cols + ". " + cells


def truncate_tokens(text: str, cap: int = DEFAULT_TOKEN_CAP) -> str:
    """Cap a text at its first ``cap`` whitespace tokens.

    Texts within the cap pass through unchanged (whitespace intact);
    longer texts are rebuilt with single spaces. Idempotent.
    """
    if cap < 0:
        raise ValueError("token cap must be non-negative")
    tokens = text.split()
    if len(tokens) <= cap:
        return text
    return " ".join(tokens[:cap])
