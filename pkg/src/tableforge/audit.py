"""Dataset hygiene: leakage auditing, agreement stats, score
distributions.

A similar-table dataset is a graph, and graphs leak: if train says A~B
and B~C, a test pair (A, C) is answerable without learning anything. The
audit treats any same-component test pair as leaked (connectivity, the
safe superset of the two-hop example), reports the two-hop count
separately, and the split repair assigns whole components to one side so
leakage is structurally impossible.
"""

from __future__ import annotations

import random
from collections import Counter, deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .embedding import EmbeddingProvider, cosine_similarity
from .seeds import derive_seed
from .serialize import DEFAULT_TOKEN_CAP, to_embedding_text, truncate_tokens
from .tables import Table

WITNESS_SAMPLE_LIMIT = 5


class AuditError(ValueError):
    """Audit input violates a precondition."""


class UnionFind:
    """Disjoint sets over arbitrary hashable ids, with path compression."""

    def __init__(self) -> None:
        self.parent: dict[str, str] = {}
        self.size: dict[str, int] = {}

    def add(self, x: str) -> None:
        if x not in self.parent:
            self.parent[x] = x
            self.size[x] = 1

    def find(self, x: str) -> str:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: str, b: str) -> None:
        self.add(a)
        self.add(b)
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


@dataclass(frozen=True)
class PairSet:
    """Unordered similar pairs: canonical (min, max), no self-pairs,
    duplicates collapsed."""

    pairs: frozenset[tuple[str, str]]

    def __init__(self, pairs: Iterable[tuple[str, str]] = ()) -> None:
        canonical = set()
        for a, b in pairs:
            if a == b:
                continue
            canonical.add((a, b) if a <= b else (b, a))
        object.__setattr__(self, "pairs", frozenset(canonical))

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(sorted(self.pairs))

    def ids(self) -> set[str]:
        out = set()
        for a, b in self.pairs:
            out.add(a)
            out.add(b)
        return out


def pair_graph_components(p: PairSet) -> dict[str, str]:
    """Map each id to its component id (the smallest member id).

    Keying by the minimum member makes the labels independent of input
    order.
    """
    uf = UnionFind()
    for a, b in p:
        uf.union(a, b)
    roots: dict[str, str] = {}
    for x in sorted(uf.parent):
        root = uf.find(x)
        if root not in roots:
            roots[root] = x
        else:
            roots[root] = min(roots[root], x)
    return {x: roots[uf.find(x)] for x in uf.parent}


@dataclass(frozen=True)
class LeakageReport:
    n_test_pairs: int
    n_leaked: int
    fraction: float
    n_leaked_chain2: int
    witnesses: tuple[tuple[str, ...], ...] = ()

    def to_json_dict(self) -> dict:
        return {
            "n_test_pairs": self.n_test_pairs,
            "n_leaked": self.n_leaked,
            "fraction": round(self.fraction, 9),
            "n_leaked_chain2": self.n_leaked_chain2,
            "witnesses": [list(w) for w in self.witnesses],
        }


def transitive_leakage(train: PairSet, test: PairSet) -> LeakageReport:
    """How many test pairs the train graph already implies.

    A test pair is leaked when its endpoints are connected in the train
    graph; two-hop-or-closer leaks are counted separately; a few leaked
    pairs get shortest witness chains attached.
    """
    components = pair_graph_components(train)
    adjacency: dict[str, set[str]] = {}
    for a, b in train:
        adjacency.setdefault(a, set()).add(b)
        adjacency.setdefault(b, set()).add(a)

    leaked: list[tuple[str, str]] = []
    n_chain2 = 0
    for a, b in test:
        ca = components.get(a)
        if ca is None or ca != components.get(b):
            continue
        leaked.append((a, b))
        nbrs_a = adjacency.get(a, set())
        if b in nbrs_a or nbrs_a & adjacency.get(b, set()):
            n_chain2 += 1

    witnesses = tuple(
        tuple(_shortest_chain(adjacency, a, b))
        for a, b in leaked[:WITNESS_SAMPLE_LIMIT]
    )
    n_test = len(test)
    return LeakageReport(
        n_test_pairs=n_test,
        n_leaked=len(leaked),
        fraction=(len(leaked) / n_test) if n_test else 0.0,
        n_leaked_chain2=n_chain2,
        witnesses=witnesses,
    )


def _shortest_chain(
    adjacency: dict[str, set[str]], start: str, goal: str
) -> list[str]:
    """Shortest path between two connected ids, ties toward smaller ids."""
    previous: dict[str, str] = {start: start}
    queue = deque([start])
    while queue:
        x = queue.popleft()
        if x == goal:
            break
        for y in sorted(adjacency.get(x, ())):
            if y not in previous:
                previous[y] = x
                queue.append(y)
    chain = [goal]
    while chain[-1] != start:
        chain.append(previous[chain[-1]])
    return chain[::-1]


def leakage_free_split(
    p: PairSet,
    train_fraction: float = 0.8,
    seed: int = 0,
) -> tuple[PairSet, PairSet]:
    """Split pairs into train/test with zero transitive leakage.

    Whole connected components go to one side or the other; components
    are placed largest-first into whichever side is furthest below its
    target share of pairs.
    """
    if not 0.0 < train_fraction < 1.0:
        raise AuditError("train_fraction must lie strictly inside (0, 1)")
    components = pair_graph_components(p)
    by_component: dict[str, list[tuple[str, str]]] = {}
    for a, b in p:
        by_component.setdefault(components[a], []).append((a, b))

    keys = sorted(by_component)
    random.Random(seed).shuffle(keys)
    keys.sort(key=lambda c: -len(by_component[c]))

    total = len(p)
    targets = [train_fraction * total, (1.0 - train_fraction) * total]
    counts = [0, 0]
    sides: list[list[tuple[str, str]]] = [[], []]
    for key in keys:
        pairs = by_component[key]
        deficits = [targets[0] - counts[0], targets[1] - counts[1]]
        side = 0 if deficits[0] >= deficits[1] else 1
        sides[side].extend(pairs)
        counts[side] += len(pairs)

    train, test = PairSet(sides[0]), PairSet(sides[1])
    report = transitive_leakage(train, test)
    assert report.n_leaked == 0, "component split must not leak"
    return train, test


def cohen_kappa(labels_a: Sequence, labels_b: Sequence) -> float:
    """Chance-corrected agreement between two label sequences.

    Perfect chance agreement (p_e = 1) is defined as 1.0 when the lists
    agree everywhere and 0.0 otherwise.
    """
    if len(labels_a) != len(labels_b):
        raise AuditError(
            f"label lists differ in length: {len(labels_a)} vs "
            f"{len(labels_b)}"
        )
    n = len(labels_a)
    if n == 0:
        raise AuditError("label lists must be non-empty")
    observed = sum(1 for x, y in zip(labels_a, labels_b) if x == y) / n
    freq_a = Counter(labels_a)
    freq_b = Counter(labels_b)
    expected = sum(
        (freq_a[label] / n) * (freq_b[label] / n) for label in freq_a
    )
    if expected >= 1.0 - 1e-15:
        return 1.0 if observed >= 1.0 - 1e-15 else 0.0
    return (observed - expected) / (1.0 - expected)


@dataclass(frozen=True)
class SimilarityDistribution:
    pair_ids: tuple[tuple[str, str], ...]
    scores: tuple[float, ...]
    mean: float
    median: float
    percentiles: dict[int, float]

    def to_json_dict(self) -> dict:
        return {
            "n_pairs": len(self.scores),
            "mean": round(self.mean, 9),
            "median": round(self.median, 9),
            "percentiles": {
                str(q): round(v, 9) for q, v in self.percentiles.items()
            },
        }


def similarity_distribution(
    pairs: Sequence[tuple[Table, Table]],
    provider: EmbeddingProvider,
    seed: int,
    blank_cells: bool = False,
    token_cap: int = DEFAULT_TOKEN_CAP,
) -> SimilarityDistribution:
    """Cosine score distribution over table pairs.

    Each side serializes with its own derived seed, so the two tables of
    a pair never share a row pick by construction.
    """
    if not pairs:
        raise AuditError("at least one pair is required")
    texts: list[str] = []
    for i, (left, right) in enumerate(pairs):
        for side, t in (("left", left), ("right", right)):
            texts.append(
                truncate_tokens(
                    to_embedding_text(
                        t, derive_seed(seed, "pair", i, side), blank_cells
                    ),
                    token_cap,
                )
            )
    vectors = provider.embed(texts)
    scores = [
        cosine_similarity(vectors[2 * i], vectors[2 * i + 1])
        for i in range(len(pairs))
    ]
    arr = np.asarray(scores, dtype=np.float64)
    percentiles = {
        q: float(np.percentile(arr, q)) for q in range(0, 101, 10)
    }
    return SimilarityDistribution(
        pair_ids=tuple((l.id, r.id) for l, r in pairs),
        scores=tuple(scores),
        mean=float(arr.mean()),
        median=float(np.median(arr)),
        percentiles=percentiles,
    )
