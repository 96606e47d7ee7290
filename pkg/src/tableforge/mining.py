"""Hard-negative mining: hybrid lexical + dense retrieval, rank-fused.

Negatives that merely differ from the anchor teach a model little; the
useful ones look similar without being so. Both a BM25 channel and a
dense channel rank the pool from the anchor's point of view, the
rankings are fused reciprocally, and the anchor plus its true positives
are filtered out of the head of the fused list.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bench import IndexEntry, VectorIndex, top_k

DEFAULT_N_HARD = 15
DEFAULT_RRF_K = 60
DEFAULT_BM25_K1 = 1.2
DEFAULT_BM25_B = 0.75
DEFAULT_CANDIDATE_DEPTH = 200


class MiningError(ValueError):
    """The candidate pool cannot supply the requested negatives."""


@dataclass(frozen=True)
class MiningConfig:
    n_hard: int = DEFAULT_N_HARD
    rrf_k: int = DEFAULT_RRF_K
    bm25_k1: float = DEFAULT_BM25_K1
    bm25_b: float = DEFAULT_BM25_B
    depth: int = DEFAULT_CANDIDATE_DEPTH

    def __post_init__(self) -> None:
        if self.n_hard < 1:
            raise MiningError("n_hard must be >= 1")
        if self.depth < self.n_hard:
            raise MiningError("depth must be >= n_hard")


class Bm25Index:
    """BM25 postings over a fixed document list, reusable across queries.

    One posting per term holds parallel arrays of document indices and
    term frequencies, so scoring a query term is a vectorized update.
    """

    def __init__(
        self,
        ids: Sequence[str],
        docs: Sequence[Sequence[str]],
        k1: float = DEFAULT_BM25_K1,
        b: float = DEFAULT_BM25_B,
    ) -> None:
        if len(ids) != len(docs):
            raise MiningError("one id per document is required")
        if len(set(ids)) != len(ids):
            raise MiningError("document ids must be unique")
        self.ids = tuple(ids)
        self.docs = tuple(tuple(d) for d in docs)
        self.k1 = k1
        self.b = b
        self.doc_lengths = np.array([len(d) for d in docs], dtype=np.float64)
        n = len(docs)
        self.avgdl = (float(self.doc_lengths.sum()) / n) if n else 0.0
        raw: dict[str, dict[int, int]] = {}
        for i, doc in enumerate(docs):
            for term, tf in Counter(doc).items():
                raw.setdefault(term, {})[i] = tf
        self.postings: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        for term, by_doc in raw.items():
            doc_idx = np.fromiter(by_doc.keys(), dtype=np.int64)
            tf = np.fromiter(by_doc.values(), dtype=np.float64)
            self.postings[term] = (doc_idx, tf)

    def __len__(self) -> int:
        return len(self.ids)

    def scores(self, query_tokens: Sequence[str]) -> np.ndarray:
        """BM25 score of every document for the query.

        Repeated query tokens contribute once per occurrence.
        """
        n = len(self.ids)
        out = np.zeros(n, dtype=np.float64)
        if not n:
            return out
        for term in query_tokens:
            posting = self.postings.get(term)
            if posting is None:
                continue
            doc_idx, tf = posting
            df = len(doc_idx)
            idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
            norm = 1.0 - self.b + self.b * self.doc_lengths[doc_idx] / self.avgdl
            out[doc_idx] += idf * tf * (self.k1 + 1.0) / (tf + self.k1 * norm)
        return out

    def top(
        self, query_tokens: Sequence[str], depth: int
    ) -> list[str]:
        """Ids of the ``depth`` best documents, ties by document order."""
        scores = self.scores(query_tokens)
        order = np.lexsort((np.arange(len(scores)), -scores))
        return [self.ids[int(i)] for i in order[:depth]]


def bm25_scores(
    query_tokens: Sequence[str],
    corpus_tokens: Sequence[Sequence[str]],
    k1: float = DEFAULT_BM25_K1,
    b: float = DEFAULT_BM25_B,
) -> list[tuple[int, float]]:
    """One-shot BM25 over raw token lists.

    Returns (document index, score) pairs sorted by descending score,
    ties by ascending index.
    """
    if not corpus_tokens:
        raise MiningError("corpus must be non-empty")
    ids = [str(i) for i in range(len(corpus_tokens))]
    index = Bm25Index(ids, corpus_tokens, k1=k1, b=b)
    scores = index.scores(query_tokens)
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return [(i, float(scores[i])) for i in order]


def rrf_fuse(
    rankings: Sequence[Sequence[str]], rrf_k: int = DEFAULT_RRF_K
) -> list[str]:
    """Reciprocal-rank fusion of several ranked id lists.

    score(id) = sum over rankings containing id of 1/(rrf_k + rank),
    rank counted from 1. Sorted by descending score, ties by ascending
    id. Invariant to the order the rankings are supplied in.
    """
    if not rankings:
        raise MiningError("at least one ranking is required")
    scores: dict[str, float] = {}
    for ranking in rankings:
        for rank, item in enumerate(ranking, start=1):
            scores[item] = scores.get(item, 0.0) + 1.0 / (rrf_k + rank)
    return sorted(scores, key=lambda item: (-scores[item], item))


def mine_hard_negatives(
    anchor_id: str,
    positives: set[str],
    dense_index: VectorIndex | Sequence[IndexEntry],
    lexical_index: Bm25Index,
    cfg: MiningConfig = MiningConfig(),
) -> list[str]:
    """Pick ``cfg.n_hard`` distractors for one anchor.

    The anchor queries both channels (its own dense vector, its own
    lexical tokens), the two depth-limited rankings are fused, and the
    anchor plus positives are dropped before taking the head.
    """
    vindex = VectorIndex.ensure(dense_index)
    pool = len(vindex)
    if pool <= cfg.n_hard + len(positives):
        raise MiningError(
            f"pool of {pool} cannot supply {cfg.n_hard} negatives "
            f"beyond {len(positives)} positives"
        )
    if vindex.ids != lexical_index.ids and set(vindex.ids) != set(
        lexical_index.ids
    ):
        raise MiningError("dense and lexical indexes cover different ids")
    anchor_pos = vindex.position.get(anchor_id)
    if anchor_pos is None:
        raise MiningError(f"anchor {anchor_id!r} is not in the pool")

    dense_ranking = [
        rid
        for rid, _ in top_k(
            vindex, vindex.matrix[anchor_pos], cfg.depth
        )
    ]
    lex_pos = lexical_index.ids.index(anchor_id)
    lexical_ranking = lexical_index.top(
        lexical_index.docs[lex_pos], cfg.depth
    )

    fused = rrf_fuse([dense_ranking, lexical_ranking], cfg.rrf_k)
    banned = positives | {anchor_id}
    negatives = [rid for rid in fused if rid not in banned][: cfg.n_hard]
    if len(negatives) < cfg.n_hard:
        raise MiningError(
            f"only {len(negatives)} candidates survive filtering for "
            f"anchor {anchor_id!r}; deepen the candidate search"
        )
    return negatives
