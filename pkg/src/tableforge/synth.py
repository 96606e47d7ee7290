"""Deterministic synthetic corpora for experiments and tests.

These tables are built to be confusable on purpose: titles come from a
medium pool (the discriminative signal a retriever should learn), column
names from a deliberately tiny pool (shared across unrelated tables), and
cells are high-entropy (numbers, wide word pool) so that naive bag-of-
words similarity is noisy. No external data, fully seeded.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .seeds import derive_seed
from .tables import Table

_SYLLABLES = tuple(
    c + v for c in "bdfghklmnprstvz" for v in "aeiou"
)  # 75 two-letter syllables

_TITLE_OFFSET = 0
_COLUMN_OFFSET = 1100
_CELL_OFFSET = 1200


def synth_word(i: int) -> str:
    """The i-th word of the synthetic lexicon (stable forever)."""
    n = len(_SYLLABLES)
    first = _SYLLABLES[i % n]
    second = _SYLLABLES[(i // n) % n]
    return first + second


@dataclass(frozen=True)
class SynthConfig:
    title_vocab: int = 200
    column_vocab: int = 12
    cell_vocab: int = 600
    min_columns: int = 3
    max_columns: int = 6
    min_rows: int = 2
    max_rows: int = 8
    numeric_table_fraction: float = 0.5

    def __post_init__(self) -> None:
        if self.max_columns > self.column_vocab:
            raise ValueError("column_vocab must cover max_columns")
        if self.min_columns < 2 or self.min_columns > self.max_columns:
            raise ValueError("column bounds are inconsistent")
        if self.min_rows < 1 or self.min_rows > self.max_rows:
            raise ValueError("row bounds are inconsistent")


def make_table(
    table_id: str, seed: int, cfg: SynthConfig = SynthConfig()
) -> Table:
    """One synthetic table, a pure function of (table_id, seed, cfg)."""
    rng = random.Random(seed)
    numeric = rng.random() < cfg.numeric_table_fraction
    n_cols = rng.randint(cfg.min_columns, cfg.max_columns)
    n_rows = rng.randint(cfg.min_rows, cfg.max_rows)

    title_words = [
        synth_word(_TITLE_OFFSET + rng.randrange(cfg.title_vocab))
        for _ in range(2)
    ]
    title = " ".join(title_words)

    column_names = [
        synth_word(_COLUMN_OFFSET + j)
        for j in rng.sample(range(cfg.column_vocab), n_cols)
    ]

    if numeric:
        # at least one numeric column so calculation is applicable
        n_numeric = rng.randint(1, n_cols)
        numeric_cols = set(rng.sample(range(n_cols), n_numeric))
    else:
        numeric_cols = set()

    rows = []
    for _ in range(n_rows):
        row = []
        for j in range(n_cols):
            if j in numeric_cols:
                row.append(str(rng.randint(0, 99999)))
            else:
                row.append(
                    synth_word(_CELL_OFFSET + rng.randrange(cfg.cell_vocab))
                )
        rows.append(tuple(row))

    description = "Records of {} across {} entries".format(
        " and ".join(column_names[:2]), n_rows
    )
    return Table(
        id=table_id,
        title=title,
        description=description,
        column_names=tuple(column_names),
        rows=tuple(rows),
    )


def make_corpus(
    n: int,
    seed: int,
    id_prefix: str = "t",
    cfg: SynthConfig = SynthConfig(),
) -> list[Table]:
    """``n`` synthetic tables with ids ``<prefix>00000`` onward."""
    return [
        make_table(
            f"{id_prefix}{i:05d}",
            derive_seed(seed, "table", id_prefix, i),
            cfg,
        )
        for i in range(n)
    ]


def random_pairs(
    tables: list[Table], n: int, seed: int
) -> list[tuple[Table, Table]]:
    """``n`` uniformly random pairs of distinct tables."""
    if len(tables) < 2:
        raise ValueError("need at least two tables")
    rng = random.Random(seed)
    pairs = []
    for _ in range(n):
        i, j = rng.sample(range(len(tables)), 2)
        pairs.append((tables[i], tables[j]))
    return pairs
