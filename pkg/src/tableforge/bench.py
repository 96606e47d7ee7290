"""Exact retrieval over an embedded corpus and its evaluation protocol.

Scoring is a full scan: corpora here are small enough that exactness is
cheaper than maintaining an approximate index. Metrics are computed in
plain Python floats so reports are bit-stable across numpy versions.
"""

from __future__ import annotations

import csv
import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .embedding import EmbeddingProvider
from .seeds import derive_seed
from .serialize import DEFAULT_TOKEN_CAP, to_embedding_text, truncate_tokens
from .tables import Table

DEFAULT_KS = (2, 10)
DEFAULT_SPLIT_RATIOS = (11 / 14, 1 / 14, 2 / 14)
REPORT_DECIMALS = 9


class BenchError(ValueError):
    """Evaluation input is inconsistent (unknown ids, bad ratios)."""


@dataclass(frozen=True)
class IndexEntry:
    table_id: str
    vector: np.ndarray


class VectorIndex:
    """Entries stacked into one matrix for batch cosine scoring.

    Rows are L2-normalized at construction (zero rows stay zero), so a
    scan is a single matrix-vector product.
    """

    def __init__(self, entries: Sequence[IndexEntry]) -> None:
        ids = [e.table_id for e in entries]
        if len(set(ids)) != len(ids):
            raise BenchError("index ids must be unique")
        self.ids: tuple[str, ...] = tuple(ids)
        if entries:
            m = np.stack([np.asarray(e.vector, dtype=np.float64) for e in entries])
        else:
            m = np.zeros((0, 0), dtype=np.float64)
        norms = np.linalg.norm(m, axis=1, keepdims=True) if len(entries) else m
        if len(entries):
            m = m / np.where(norms > 0.0, norms, 1.0)
        self.matrix = m
        self._ids_arr = np.array(ids)
        self.position = {table_id: i for i, table_id in enumerate(ids)}

    @classmethod
    def ensure(
        cls, index: "VectorIndex | Sequence[IndexEntry]"
    ) -> "VectorIndex":
        if isinstance(index, cls):
            return index
        return cls(index)

    def __len__(self) -> int:
        return len(self.ids)


def embedding_text_for(
    t: Table,
    seed: int,
    blank_cells: bool = False,
    token_cap: int = DEFAULT_TOKEN_CAP,
) -> str:
    """The capped embedding text of one table, with a per-table seed."""
    return truncate_tokens(
        to_embedding_text(t, derive_seed(seed, "embed-row", t.id), blank_cells),
        token_cap,
    )


def build_index(
    corpus: Sequence[Table],
    provider: EmbeddingProvider,
    seed: int,
    blank_cells: bool = False,
    token_cap: int = DEFAULT_TOKEN_CAP,
) -> list[IndexEntry]:
    """Serialize and embed every table; ids must be unique."""
    ids = [t.id for t in corpus]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise BenchError(f"duplicate table ids: {dupes[:5]}")
    texts = [
        embedding_text_for(t, seed, blank_cells, token_cap) for t in corpus
    ]
    vectors = provider.embed(texts)
    return [
        IndexEntry(table_id=ids[i], vector=vectors[i])
        for i in range(len(corpus))
    ]


def top_k(
    index: VectorIndex | Sequence[IndexEntry],
    query_vector: np.ndarray,
    k: int,
    exclude_id: str | None = None,
) -> list[tuple[str, float]]:
    """The k highest-cosine entries, ties broken by ascending table id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    vindex = VectorIndex.ensure(index)
    if not len(vindex):
        return []
    q = np.asarray(query_vector, dtype=np.float64)
    qn = float(np.linalg.norm(q))
    scores = vindex.matrix @ (q / qn) if qn > 0.0 else np.zeros(len(vindex))
    order = np.lexsort((vindex._ids_arr, -scores))
    ranked = []
    for i in order:
        table_id = vindex.ids[int(i)]
        if table_id == exclude_id:
            continue
        ranked.append((table_id, float(scores[int(i)])))
        if len(ranked) == k:
            break
    return ranked


def recall_at_k(
    ranked_ids: Sequence[str], relevant: set[str], k: int
) -> float:
    """Fraction of the relevant set found in the top k."""
    if not relevant:
        raise BenchError("relevant set must be non-empty")
    hits = sum(1 for rid in ranked_ids[:k] if rid in relevant)
    return hits / len(relevant)


def ndcg_at_k(
    ranked_ids: Sequence[str], relevant: set[str], k: int
) -> float:
    """Binary-gain nDCG: discounted hits against the ideal prefix."""
    if not relevant:
        raise BenchError("relevant set must be non-empty")
    dcg = 0.0
    for i, rid in enumerate(ranked_ids[:k], start=1):
        if rid in relevant:
            dcg += 1.0 / math.log2(i + 1)
    ideal = min(len(relevant), k)
    idcg = sum(1.0 / math.log2(i + 1) for i in range(1, ideal + 1))
    return dcg / idcg


@dataclass(frozen=True)
class EvalReport:
    """Per-query metrics plus their macro-averages."""

    per_query: dict[str, dict[str, float]]
    aggregates: dict[str, float]

    def to_json_dict(self) -> dict:
        return {
            "aggregates": {
                m: round(v, REPORT_DECIMALS)
                for m, v in self.aggregates.items()
            },
            "per_query": {
                qid: {
                    m: round(v, REPORT_DECIMALS)
                    for m, v in metrics.items()
                }
                for qid, metrics in sorted(self.per_query.items())
            },
        }


def metric_names(ks: Sequence[int] = DEFAULT_KS) -> list[str]:
    names = []
    for k in ks:
        names.append(f"recall@{k}")
        names.append(f"ndcg@{k}")
    return names


def evaluate(
    index: VectorIndex | Sequence[IndexEntry],
    queries: Sequence[tuple[Table, set[str]]],
    provider: EmbeddingProvider,
    seed: int,
    ks: Sequence[int] = DEFAULT_KS,
    blank_cells: bool = False,
    token_cap: int = DEFAULT_TOKEN_CAP,
) -> EvalReport:
    """Rank the corpus for every query table and score against its
    relevant ids.

    The query's own id is excluded from its candidate pool. Every
    relevant id must exist in the index.
    """
    vindex = VectorIndex.ensure(index)
    known = set(vindex.ids)
    for t, relevant in queries:
        for rid in sorted(relevant):
            if rid not in known:
                raise BenchError(
                    f"relevant id {rid!r} for query {t.id!r} is not in "
                    f"the index"
                )
    texts = [
        embedding_text_for(t, seed, blank_cells, token_cap)
        for t, _ in queries
    ]
    vectors = provider.embed(texts) if queries else np.zeros((0, 0))
    k_max = max(ks)
    per_query: dict[str, dict[str, float]] = {}
    for i, (t, relevant) in enumerate(queries):
        ranked = top_k(vindex, vectors[i], k_max, exclude_id=t.id)
        ranked_ids = [rid for rid, _ in ranked]
        metrics = {}
        for k in ks:
            metrics[f"recall@{k}"] = recall_at_k(ranked_ids, relevant, k)
            metrics[f"ndcg@{k}"] = ndcg_at_k(ranked_ids, relevant, k)
        per_query[t.id] = metrics
    names = metric_names(ks)
    aggregates = {
        m: (
            sum(q[m] for q in per_query.values()) / len(per_query)
            if per_query
            else 0.0
        )
        for m in names
    }
    return EvalReport(per_query=per_query, aggregates=aggregates)


def write_eval_report(
    report: EvalReport, json_path: str | Path, csv_path: str | Path
) -> None:
    """Write the JSON report and the per-query CSV next to each other."""
    json_path = Path(json_path)
    csv_path = Path(csv_path)
    json_path.write_text(
        json.dumps(report.to_json_dict(), ensure_ascii=False, indent=2)
        + "\n",
        encoding="utf-8",
    )
    names = list(next(iter(report.per_query.values())).keys()) if (
        report.per_query
    ) else list(report.aggregates.keys())
    with csv_path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["query_id", *names])
        for qid in sorted(report.per_query):
            row = [qid]
            for m in names:
                row.append(f"{report.per_query[qid][m]:.9f}")
            writer.writerow(row)


def split_dataset(
    anchors: Sequence[str],
    ratios: tuple[float, float, float] = DEFAULT_SPLIT_RATIOS,
    seed: int = 0,
) -> tuple[list[str], list[str], list[str]]:
    """Partition anchor ids into train/validation/test by ratio.

    Sizes use largest-remainder rounding so they always sum to the input
    size; the shuffle is seeded over the sorted ids, so the split is
    independent of input order.
    """
    if len(ratios) != 3:
        raise BenchError("exactly three ratios are required")
    if any(r < 0 for r in ratios):
        raise BenchError("ratios must be non-negative")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise BenchError(f"ratios must sum to 1, got {sum(ratios)}")
    ids = sorted(set(anchors))
    if len(ids) != len(anchors):
        raise BenchError("anchor ids must be unique")
    rng = random.Random(seed)
    rng.shuffle(ids)
    n = len(ids)
    raw = [n * r for r in ratios]
    sizes = [int(x) for x in raw]
    remainders = sorted(
        range(3), key=lambda i: (-(raw[i] - sizes[i]), i)
    )
    for i in range(n - sum(sizes)):
        sizes[remainders[i % 3]] += 1
    train = ids[: sizes[0]]
    validation = ids[sizes[0] : sizes[0] + sizes[1]]
    test = ids[sizes[0] + sizes[1] :]
    return train, validation, test
