#!/usr/bin/env python3
"""End-to-end demo of the forge on a synthetic corpus.

Builds a corpus of random tables, then drives every CLI stage with the
built-in mock chat provider and hashed embeddings: describe, generate,
split, audit, mine, train, and eval, finishing with the similarity
distribution audit. Prints one summary line per stage, exactly what the
CLI itself would print.

Usage: python3 scripts/run_mock_pipeline.py [--n-tables 120] [--out out]
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from tableforge import io as tfio
from tableforge.cli import main as cli_main
from tableforge.synth import make_corpus


def run(argv):
    print("+ tableforge " + " ".join(argv), file=sys.stderr)
    code = cli_main(argv)
    if code != 0:
        raise SystemExit(code)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-tables", type=int, default=120)
    ap.add_argument("--out", default="out")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=3)
    ap.add_argument("--embed-dimension", type=int, default=1024)
    ap.add_argument("--projection-dim", type=int, default=256)
    ap.add_argument("--hard-negatives", type=int, default=15)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus_path = out / "corpus.jsonl"
    corpus = make_corpus(args.n_tables, seed=args.seed, id_prefix="t")
    tfio.write_corpus(corpus_path, corpus)
    print(f"wrote {len(corpus)} synthetic tables to {corpus_path}",
          file=sys.stderr)

    base = ["--out", str(out), "--seed", str(args.seed)]
    knobs = [
        "--embed-dimension", str(args.embed_dimension),
        "--projection-dim", str(args.projection_dim),
        "--hard-negatives", str(args.hard_negatives),
        "--epochs", str(args.epochs),
    ]

    run(["describe", "--corpus", str(corpus_path), *base])
    described = out / "described_corpus.jsonl"
    run(["generate", "--corpus", str(described), *base])
    run(["split", *base])
    run(["audit", *base])

    # mining/training/eval rank generated targets against the corpus,
    # so the candidate file holds originals plus generated tables
    combined_path = out / "combined_corpus.jsonl"
    combined = tfio.load_corpus(described) + tfio.load_corpus(
        out / "generated_tables.jsonl"
    )
    tfio.write_corpus(combined_path, combined)

    run(["mine", "--corpus", str(combined_path), *base, *knobs])
    run(["train", "--corpus", str(combined_path), *base, *knobs])
    run(["eval", "--corpus", str(combined_path), *base, *knobs])
    run([
        "eval", "--corpus", str(combined_path), *base, *knobs,
        "--checkpoint", str(out / "model.ckpt"),
    ])
    run(["simdist", "--corpus", str(combined_path), *base, *knobs])
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
