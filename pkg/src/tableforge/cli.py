"""Command-line surface: describe, generate, split, audit, mine, train,
eval, simdist.

Each subcommand reads and writes the artifact files under one output
directory, prints a one-line JSON summary on success, and exits nonzero
with a JSON error record on stderr otherwise. Everything is deterministic
given (config, seed) with the mock providers.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import io
from .audit import (
    AuditError,
    PairSet,
    similarity_distribution,
    transitive_leakage,
)
from .bench import (
    BenchError,
    VectorIndex,
    build_index,
    embedding_text_for,
    evaluate,
    split_dataset,
    write_eval_report,
)
from .config import ConfigError, RunConfig, build_run_config
from .embedding import (
    EmbeddingError,
    HashedBowEmbedder,
    RemoteEmbeddingProvider,
    tokenize,
)
from .llm import (
    LlmError,
    MockChatProvider,
    RemoteChatProvider,
    generate_description,
)
from .mining import Bm25Index, MiningConfig, MiningError, mine_hard_negatives
from .pipeline import PlanError, run_pipeline
from .seeds import derive_seed
from .tables import Table, TableError
from .trainer import (
    ProjectionEmbeddingProvider,
    ProjectionModel,
    TrainConfig,
    TrainSample,
    TrainingError,
    load_checkpoint,
    save_checkpoint,
    train,
)

DESCRIBED_CORPUS = "described_corpus.jsonl"
PAIRS_FILE = "pairs.jsonl"
GENERATED_TABLES = "generated_tables.jsonl"
GENERATION_LOG = "generation_log.jsonl"
SPLITS_FILE = "splits.json"
LEAKAGE_REPORT = "leakage_report.json"
NEGATIVES_FILE = "negatives.jsonl"
MODEL_CHECKPOINT = "model.ckpt"
TRAIN_LOG = "train_log.json"
EVAL_REPORT_JSON = "eval_report.json"
EVAL_REPORT_CSV = "eval_report.csv"
SIMILARITY_JSON = "similarity.json"
SIMILARITY_CSV = "similarity.csv"

_CLI_ERRORS = (
    ConfigError,
    TableError,
    PlanError,
    LlmError,
    EmbeddingError,
    BenchError,
    MiningError,
    TrainingError,
    AuditError,
    io.DataFileError,
    OSError,
)


def make_chat_provider(cfg: RunConfig):
    if cfg.provider == "mock":
        return MockChatProvider(seed=cfg.seed)
    if not cfg.endpoint:
        raise ConfigError("remote chat provider needs --endpoint")
    return RemoteChatProvider(
        endpoint=cfg.endpoint,
        model=cfg.model or "default",
        token_env=cfg.token_env,
    )


def make_embed_provider(cfg: RunConfig, checkpoint: str | None = None):
    if checkpoint:
        return ProjectionEmbeddingProvider(load_checkpoint(checkpoint))
    if cfg.embed_provider == "hashed":
        return HashedBowEmbedder(
            dimension=cfg.embed_dimension,
            seed=derive_seed(cfg.seed, "features"),
        )
    if not cfg.embed_endpoint:
        raise ConfigError("remote embedding provider needs --embed-endpoint")
    return RemoteEmbeddingProvider(
        endpoint=cfg.embed_endpoint,
        model=cfg.embed_model or "default",
        dimension=cfg.embed_dimension,
        token_env=cfg.token_env,
    )


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parallel_map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def cmd_describe(cfg: RunConfig) -> dict:
    """Fill missing table descriptions; resumable and order-stable."""
    corpus = io.load_corpus(cfg.corpus)
    out = _out_dir(cfg) / DESCRIBED_CORPUS
    existing: dict[str, str] = {}
    if out.exists():
        for t in io.load_corpus(out):
            if t.description:
                existing[t.id] = t.description
    provider = make_chat_provider(cfg)
    failures = 0

    def describe(t: Table) -> Table:
        nonlocal failures
        if t.description:
            return t
        kept = existing.get(t.id)
        if kept:
            return Table(
                id=t.id,
                title=t.title,
                description=kept,
                column_names=t.column_names,
                rows=t.rows,
            )
        try:
            text = generate_description(
                provider,
                t,
                derive_seed(cfg.seed, "describe", t.id),
                temperature=cfg.temperature,
                max_output_tokens=cfg.max_tokens,
            )
        except LlmError as e:
            failures += 1
            print(
                f"describe: table {t.id}: {e}", file=sys.stderr
            )
            return t
        return Table(
            id=t.id,
            title=t.title,
            description=text,
            column_names=t.column_names,
            rows=t.rows,
        )

    described = _parallel_map(describe, corpus, cfg.workers)
    described.sort(key=lambda t: t.id)
    io.write_corpus(out, described)
    return {
        "command": "describe",
        "tables": len(described),
        "failures": failures,
        "out": str(out),
    }


def cmd_generate(cfg: RunConfig) -> dict:
    """Run the transformation pipeline over every anchor table."""
    corpus = io.load_corpus(cfg.corpus)
    out = _out_dir(cfg)
    provider = make_chat_provider(cfg)

    def generate(anchor: Table):
        return run_pipeline(
            provider,
            anchor,
            n_targets=cfg.n_targets,
            seed=derive_seed(cfg.seed, "anchor", anchor.id),
            temperature=cfg.temperature,
            max_output_tokens=cfg.max_tokens,
        )

    all_results = _parallel_map(generate, corpus, cfg.workers)
    order = sorted(range(len(corpus)), key=lambda i: corpus[i].id)

    pairs: list[io.PairRecord] = []
    generated: list[Table] = []
    log: list[dict] = []
    for i in order:
        for result in all_results[i]:
            log.append(
                {
                    "anchor_id": result.anchor_id,
                    "plan": result.plan.op_names(),
                    "seed": result.plan.seed,
                    "accepted": result.accepted,
                    "outcomes": [
                        {
                            "op": o.op.value,
                            "accepted": o.accepted,
                            "reason": o.reason,
                        }
                        for o in result.per_op_outcomes
                    ],
                }
            )
            if result.target is None:
                continue
            pairs.append(
                io.PairRecord(
                    anchor_id=result.anchor_id,
                    target_id=result.target.id,
                    plan=tuple(result.plan.op_names()),
                    seed=result.plan.seed,
                )
            )
            generated.append(result.target)

    io.write_pairs(out / PAIRS_FILE, pairs)
    io.write_corpus(out / GENERATED_TABLES, generated)
    io.write_jsonl_atomic(out / GENERATION_LOG, log)
    return {
        "command": "generate",
        "anchors": len(corpus),
        "pairs": len(pairs),
        "rejected": sum(1 for rec in log if not rec["accepted"]),
        "out": str(out),
    }


def cmd_split(cfg: RunConfig, pairs_path: str | None) -> dict:
    out = _out_dir(cfg)
    pairs = io.read_pairs(pairs_path or out / PAIRS_FILE)
    anchors = sorted({p.anchor_id for p in pairs})
    train_ids, validation_ids, test_ids = split_dataset(
        anchors, cfg.split_ratios, seed=derive_seed(cfg.seed, "split")
    )
    splits = {
        "train": train_ids,
        "validation": validation_ids,
        "test": test_ids,
    }
    io.write_splits(out / SPLITS_FILE, splits)
    return {
        "command": "split",
        "train": len(train_ids),
        "validation": len(validation_ids),
        "test": len(test_ids),
        "out": str(out / SPLITS_FILE),
    }


def _pair_sets(
    pairs: list[io.PairRecord], splits: dict[str, list[str]]
) -> tuple[PairSet, PairSet]:
    """Train-side pairs (train + validation anchors) vs test pairs."""
    train_anchors = set(splits["train"]) | set(splits["validation"])
    test_anchors = set(splits["test"])
    train_pairs = PairSet(
        (p.anchor_id, p.target_id)
        for p in pairs
        if p.anchor_id in train_anchors
    )
    test_pairs = PairSet(
        (p.anchor_id, p.target_id)
        for p in pairs
        if p.anchor_id in test_anchors
    )
    return train_pairs, test_pairs


def cmd_audit(
    cfg: RunConfig, pairs_path: str | None, splits_path: str | None
) -> dict:
    out = _out_dir(cfg)
    pairs = io.read_pairs(pairs_path or out / PAIRS_FILE)
    splits = io.read_splits(splits_path or out / SPLITS_FILE)
    train_pairs, test_pairs = _pair_sets(pairs, splits)
    report = transitive_leakage(train_pairs, test_pairs)
    payload = {"n_train_pairs": len(train_pairs)}
    payload.update(report.to_json_dict())
    (out / LEAKAGE_REPORT).write_text(
        json.dumps(payload, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )
    summary = {"command": "audit", "out": str(out / LEAKAGE_REPORT)}
    summary.update(payload)
    summary.pop("witnesses", None)
    return summary


def cmd_mine(
    cfg: RunConfig, pairs_path: str | None, splits_path: str | None
) -> dict:
    """Mine hard negatives for every train-split anchor."""
    out = _out_dir(cfg)
    pool = io.load_corpus(cfg.corpus)
    pairs = io.read_pairs(pairs_path or out / PAIRS_FILE)
    anchors = sorted({p.anchor_id for p in pairs})
    splits_file = Path(splits_path) if splits_path else out / SPLITS_FILE
    if splits_file.exists():
        train_set = set(io.read_splits(splits_file)["train"])
        anchors = [a for a in anchors if a in train_set]

    positives: dict[str, set[str]] = {}
    for p in pairs:
        positives.setdefault(p.anchor_id, set()).add(p.target_id)

    provider = make_embed_provider(cfg)
    text_seed = derive_seed(cfg.seed, "mine")
    texts = [
        embedding_text_for(t, text_seed, cfg.blank_cells, cfg.token_cap)
        for t in pool
    ]
    dense = VectorIndex(
        build_index(pool, provider, text_seed, cfg.blank_cells, cfg.token_cap)
    )
    lexical = Bm25Index([t.id for t in pool], [tokenize(s) for s in texts])
    mining_cfg = MiningConfig(n_hard=cfg.hard_negatives)

    records: list[io.NegativesRecord] = []
    failures = 0
    for anchor_id in anchors:
        try:
            negatives = mine_hard_negatives(
                anchor_id,
                positives.get(anchor_id, set()),
                dense,
                lexical,
                mining_cfg,
            )
        except MiningError as e:
            failures += 1
            print(f"mine: anchor {anchor_id}: {e}", file=sys.stderr)
            continue
        records.append(
            io.NegativesRecord(
                anchor_id=anchor_id,
                positive_ids=tuple(sorted(positives.get(anchor_id, set()))),
                negative_ids=tuple(negatives),
            )
        )
    io.write_negatives(out / NEGATIVES_FILE, records)
    return {
        "command": "mine",
        "anchors": len(anchors),
        "mined": len(records),
        "failures": failures,
        "out": str(out / NEGATIVES_FILE),
    }


def cmd_train(
    cfg: RunConfig, pairs_path: str | None, negatives_path: str | None
) -> dict:
    out = _out_dir(cfg)
    corpus = io.load_corpus(cfg.corpus)
    by_id = {t.id: t for t in corpus}
    pairs = io.read_pairs(pairs_path or out / PAIRS_FILE)
    negatives = {
        r.anchor_id: r
        for r in io.read_negatives(negatives_path or out / NEGATIVES_FILE)
    }

    text_seed = derive_seed(cfg.seed, "traintext")

    def text_of(table_id: str) -> str:
        return embedding_text_for(
            by_id[table_id], text_seed, cfg.blank_cells, cfg.token_cap
        )

    samples = []
    for p in sorted(pairs, key=lambda p: (p.anchor_id, p.target_id)):
        record = negatives.get(p.anchor_id)
        if record is None:
            continue
        missing = [
            tid
            for tid in (p.anchor_id, p.target_id, *record.negative_ids)
            if tid not in by_id
        ]
        if missing:
            raise io.DataFileError(
                f"tables missing from corpus: {missing[:5]}"
            )
        samples.append(
            TrainSample(
                anchor_text=text_of(p.anchor_id),
                positive_text=text_of(p.target_id),
                hard_negative_texts=tuple(
                    text_of(tid)
                    for tid in record.negative_ids[: cfg.hard_negatives]
                ),
            )
        )
    if not samples:
        raise io.DataFileError(
            "no trainable pairs: every anchor lacks a negatives record"
        )

    model = ProjectionModel.random_init(
        d_out=cfg.projection_dim,
        d_in=cfg.embed_dimension,
        temperature=cfg.contrastive_temperature,
        seed=derive_seed(cfg.seed, "init"),
        feature_seed=derive_seed(cfg.seed, "features"),
    )
    result = train(
        model,
        samples,
        TrainConfig(
            batch_size=cfg.batch_size,
            n_hard=cfg.hard_negatives,
            learning_rate=cfg.learning_rate,
            epochs=cfg.epochs,
            seed=derive_seed(cfg.seed, "train"),
            token_cap=cfg.token_cap,
        ),
    )
    save_checkpoint(result.model, out / MODEL_CHECKPOINT)
    (out / TRAIN_LOG).write_text(
        json.dumps(
            {
                "samples": len(samples),
                "epoch_losses": [
                    round(x, 9) for x in result.epoch_losses
                ],
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    return {
        "command": "train",
        "samples": len(samples),
        "epoch_losses": [round(x, 6) for x in result.epoch_losses],
        "out": str(out / MODEL_CHECKPOINT),
    }


def eval_pool_and_queries(
    corpus: list[Table],
    pairs: list[io.PairRecord],
    splits: dict[str, list[str]],
) -> tuple[list[Table], list[tuple[Table, set[str]]]]:
    """Candidate pool and queries for the retrieval benchmark.

    The pool holds every original table plus the generated targets of
    test anchors only; targets of train/validation anchors stay out.
    Queries are the test anchors, each relevant to its own targets.
    """
    anchor_of = {p.target_id: p.anchor_id for p in pairs}
    test_anchors = set(splits["test"])
    pool = [
        t
        for t in corpus
        if t.id not in anchor_of or anchor_of[t.id] in test_anchors
    ]
    pool_ids = {t.id for t in pool}
    targets: dict[str, set[str]] = {}
    for p in pairs:
        if p.anchor_id in test_anchors and p.target_id in pool_ids:
            targets.setdefault(p.anchor_id, set()).add(p.target_id)
    by_id = {t.id: t for t in corpus}
    queries = [
        (by_id[aid], targets[aid])
        for aid in sorted(targets)
        if aid in by_id
    ]
    return pool, queries


def cmd_eval(
    cfg: RunConfig,
    pairs_path: str | None,
    splits_path: str | None,
    checkpoint: str | None,
) -> dict:
    out = _out_dir(cfg)
    corpus = io.load_corpus(cfg.corpus)
    pairs = io.read_pairs(pairs_path or out / PAIRS_FILE)
    splits = io.read_splits(splits_path or out / SPLITS_FILE)
    pool, queries = eval_pool_and_queries(corpus, pairs, splits)
    if not queries:
        raise BenchError("no test queries: check the splits file")
    provider = make_embed_provider(cfg, checkpoint)
    eval_seed = derive_seed(cfg.seed, "eval")
    index = build_index(
        pool, provider, eval_seed, cfg.blank_cells, cfg.token_cap
    )
    report = evaluate(
        index,
        queries,
        provider,
        eval_seed,
        ks=cfg.ks,
        blank_cells=cfg.blank_cells,
        token_cap=cfg.token_cap,
    )
    write_eval_report(report, out / EVAL_REPORT_JSON, out / EVAL_REPORT_CSV)
    return {
        "command": "eval",
        "pool": len(pool),
        "queries": len(queries),
        "aggregates": {
            m: round(v, 9) for m, v in report.aggregates.items()
        },
        "out": str(out / EVAL_REPORT_JSON),
    }


def cmd_simdist(
    cfg: RunConfig, pairs_path: str | None, n_random: int | None
) -> dict:
    """Score generated pairs against random pairs from the same corpus."""
    out = _out_dir(cfg)
    corpus = io.load_corpus(cfg.corpus)
    by_id = {t.id: t for t in corpus}
    pairs = io.read_pairs(pairs_path or out / PAIRS_FILE)
    generated = [
        (by_id[p.anchor_id], by_id[p.target_id])
        for p in sorted(pairs, key=lambda p: (p.anchor_id, p.target_id))
        if p.anchor_id in by_id and p.target_id in by_id
    ]
    if not generated:
        raise AuditError("no generated pairs found in the corpus")

    target_ids = {p.target_id for p in pairs}
    originals = [t for t in corpus if t.id not in target_ids]
    import random as _random

    rng = _random.Random(derive_seed(cfg.seed, "simdist", "random"))
    n_random = n_random if n_random is not None else len(generated)
    random_pairs = []
    for _ in range(n_random):
        i, j = rng.sample(range(len(originals)), 2)
        random_pairs.append((originals[i], originals[j]))

    provider = make_embed_provider(cfg)
    gen_dist = similarity_distribution(
        generated,
        provider,
        derive_seed(cfg.seed, "simdist", "generated"),
        cfg.blank_cells,
        cfg.token_cap,
    )
    rand_dist = similarity_distribution(
        random_pairs,
        provider,
        derive_seed(cfg.seed, "simdist", "baseline"),
        cfg.blank_cells,
        cfg.token_cap,
    )
    payload = {
        "generated": gen_dist.to_json_dict(),
        "random": rand_dist.to_json_dict(),
        "mean_gap": round(gen_dist.mean - rand_dist.mean, 9),
    }
    (out / SIMILARITY_JSON).write_text(
        json.dumps(payload, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )
    with (out / SIMILARITY_CSV).open("w", encoding="utf-8") as f:
        f.write("kind,left_id,right_id,score\n")
        for dist, kind in ((gen_dist, "generated"), (rand_dist, "random")):
            for (left, right), score in zip(dist.pair_ids, dist.scores):
                f.write(f"{kind},{left},{right},{score:.9f}\n")
    summary = {"command": "simdist", "out": str(out / SIMILARITY_JSON)}
    summary.update(payload)
    return summary


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="key = value config file")
    shared.add_argument("--corpus", help="input corpus JSONL")
    shared.add_argument("--out", help="output directory")
    shared.add_argument("--seed", type=int)
    shared.add_argument("--provider", choices=["mock", "remote"])
    shared.add_argument("--endpoint")
    shared.add_argument("--model")
    shared.add_argument("--embed-provider", choices=["hashed", "remote"])
    shared.add_argument("--embed-endpoint")
    shared.add_argument("--embed-model")
    shared.add_argument("--token-env")
    shared.add_argument("--workers", type=int)
    shared.add_argument("--n-targets", type=int)
    shared.add_argument("--batch-size", type=int)
    shared.add_argument("--hard-negatives", type=int)
    shared.add_argument("--token-cap", type=int)
    shared.add_argument("--fusion-weight", type=float)
    shared.add_argument("--train-ratio", type=float)
    shared.add_argument("--validation-ratio", type=float)
    shared.add_argument("--test-ratio", type=float)
    shared.add_argument("--temperature", type=float)
    shared.add_argument("--max-tokens", type=int)
    shared.add_argument("--contrastive-temperature", type=float)
    shared.add_argument("--learning-rate", type=float)
    shared.add_argument("--epochs", type=int)
    shared.add_argument("--embed-dimension", type=int)
    shared.add_argument("--projection-dim", type=int)
    shared.add_argument(
        "--blank-cells", action="store_const", const=True, default=None
    )
    shared.add_argument(
        "--k",
        action="append",
        type=int,
        dest="ks",
        help="metric cutoff; repeatable",
    )

    parser = argparse.ArgumentParser(
        prog="tableforge",
        description=(
            "Forge a similar-table retrieval benchmark: generate table "
            "pairs, split, audit, mine negatives, train, evaluate."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("describe", parents=[shared])
    sub.add_parser("generate", parents=[shared])

    p_split = sub.add_parser("split", parents=[shared])
    p_split.add_argument("--pairs")

    p_audit = sub.add_parser("audit", parents=[shared])
    p_audit.add_argument("--pairs")
    p_audit.add_argument("--splits")

    p_mine = sub.add_parser("mine", parents=[shared])
    p_mine.add_argument("--pairs")
    p_mine.add_argument("--splits")

    p_train = sub.add_parser("train", parents=[shared])
    p_train.add_argument("--pairs")
    p_train.add_argument("--negatives")

    p_eval = sub.add_parser("eval", parents=[shared])
    p_eval.add_argument("--pairs")
    p_eval.add_argument("--splits")
    p_eval.add_argument("--checkpoint")

    p_simdist = sub.add_parser("simdist", parents=[shared])
    p_simdist.add_argument("--pairs")
    p_simdist.add_argument("--random-pairs", type=int)
    return parser


_CONFIG_KEYS = (
    "corpus",
    "out",
    "seed",
    "provider",
    "endpoint",
    "model",
    "embed_provider",
    "embed_endpoint",
    "embed_model",
    "token_env",
    "workers",
    "n_targets",
    "batch_size",
    "hard_negatives",
    "token_cap",
    "fusion_weight",
    "train_ratio",
    "validation_ratio",
    "test_ratio",
    "temperature",
    "max_tokens",
    "contrastive_temperature",
    "learning_rate",
    "epochs",
    "embed_dimension",
    "projection_dim",
    "blank_cells",
    "ks",
)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = {
            key: getattr(args, key)
            for key in _CONFIG_KEYS
            if getattr(args, key, None) is not None
        }
        if overrides.get("ks"):
            overrides["ks"] = tuple(overrides["ks"])
        cfg = build_run_config(args.config, overrides)
        if args.command in (
            "describe",
            "generate",
            "mine",
            "train",
            "eval",
            "simdist",
        ) and not cfg.corpus:
            raise ConfigError(f"{args.command} needs --corpus")
        if args.command == "describe":
            summary = cmd_describe(cfg)
        elif args.command == "generate":
            summary = cmd_generate(cfg)
        elif args.command == "split":
            summary = cmd_split(cfg, args.pairs)
        elif args.command == "audit":
            summary = cmd_audit(cfg, args.pairs, args.splits)
        elif args.command == "mine":
            summary = cmd_mine(cfg, args.pairs, args.splits)
        elif args.command == "train":
            summary = cmd_train(cfg, args.pairs, args.negatives)
        elif args.command == "eval":
            summary = cmd_eval(cfg, args.pairs, args.splits, args.checkpoint)
        else:
            summary = cmd_simdist(cfg, args.pairs, args.random_pairs)
    except _CLI_ERRORS as e:
        record = {"error": type(e).__name__, "message": str(e)}
        print(json.dumps(record, ensure_ascii=False), file=sys.stderr)
        return 1
    print(json.dumps(summary, ensure_ascii=False))
    return 0


if __name__ == "__main__":
    sys.exit(main())
