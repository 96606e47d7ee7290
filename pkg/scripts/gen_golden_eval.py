#!/usr/bin/env python3
"""Regenerate the golden retrieval-eval fixtures in tests/fixtures/.

Everything here is computed from scratch: seed derivation, tokenizing,
the signed hashed bag-of-words encoder, the flat embedding text, cosine
ranking, recall/nDCG, and the exact report serialization. The test suite
runs the real CLI over the same inputs and compares bytes, so any drift
in the library's eval path shows up as a fixture mismatch.

Usage: python3 scripts/gen_golden_eval.py [OUT_DIR]
"""

import csv
import hashlib
import json
import math
import random
import re
import sys
from pathlib import Path

import numpy as np

SEED = 5
DIMENSION = 64
KS = (2, 10)
TOKEN_CAP = 512
DECIMALS = 9

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "tests" / "fixtures"

# 12 original tables; t01..t04 act as anchors with two generated
# targets each. t05 deliberately shadows t03 so not every query gets a
# perfect top-2.
ORIGINALS = [
    ("t01", "Monthly Rainfall", "Average rainfall in millimetres by city",
     ["City", "January", "February"],
     [["Lisbon", "110", "90"], ["Oslo", "49", "36"], ["Perth", "17", "18"]]),
    ("t02", "Stadium Capacity", "Largest football stadiums in Europe",
     ["Stadium", "City", "Capacity"],
     [["Camp Nou", "Barcelona", "99354"],
      ["Wembley", "London", "90000"],
      ["Signal Iduna Park", "Dortmund", "81365"]]),
    ("t03", "Marathon Results", "Finishing times for elite runners",
     ["Runner", "Country", "Time"],
     [["Kipchoge", "Kenya", "2:02:37"],
      ["Bekele", "Ethiopia", "2:03:03"],
      ["Kipruto", "Kenya", "2:04:55"]]),
    ("t04", "Cheese Exports", "Annual cheese exports by country",
     ["Country", "Tonnes", "Year"],
     [["Netherlands", "950000", "2023"],
      ["Germany", "880000", "2023"],
      ["France", "690000", "2023"]]),
    ("t05", "Half Marathon Results", "Finishing times for a city half",
     ["Runner", "Country", "Time"],
     [["Kiplimo", "Uganda", "57:31"],
      ["Kandie", "Kenya", "57:32"],
      ["Ebenyo", "Kenya", "58:30"]]),
    ("t06", "Volcano Eruptions", "Recent eruptions and their height",
     ["Volcano", "Country", "Year"],
     [["Etna", "Italy", "2021"], ["Fagradalsfjall", "Iceland", "2021"],
      ["Merapi", "Indonesia", "2020"]]),
    ("t07", "Metro Ridership", "Busiest metro systems by annual riders",
     ["City", "Riders", "Lines"],
     [["Tokyo", "3463000000", "13"], ["Shanghai", "2833000000", "18"],
      ["Seoul", "2656000000", "9"]]),
    ("t08", "Apple Harvest", "Orchard output by variety",
     ["Variety", "Bushels", "Region"],
     [["Honeycrisp", "12400", "Washington"],
      ["Gala", "20100", "Washington"],
      ["Fuji", "9800", "Michigan"]]),
    ("t09", "Chess Ratings", "Top classical ratings this season",
     ["Player", "Rating", "Federation"],
     [["Carlsen", "2830", "Norway"], ["Caruana", "2805", "USA"],
      ["Ding", "2780", "China"]]),
    ("t10", "Solar Capacity", "Installed solar capacity by state",
     ["State", "Megawatts", "Rank"],
     [["California", "46874", "1"], ["Texas", "22885", "2"],
      ["Florida", "12809", "3"]]),
    ("t11", "Beach Water Quality", "Coliform readings at city beaches",
     ["Beach", "Reading", "Status"],
     [["North Cove", "14", "open"], ["Seal Point", "88", "advisory"],
      ["Driftwood", "9", "open"]]),
    ("t12", "Night Train Routes", "Sleeper services and their endpoints",
     ["Route", "Operator", "Hours"],
     [["Vienna-Paris", "Nightjet", "14"], ["Stockholm-Hamburg", "SJ", "12"],
      ["Zagreb-Zurich", "ÖBB", "15"]]),
]

# Generated targets. Shapes mimic what the six operations produce but
# the cells are hand-written; eval only reads the serialized text.
TARGETS = [
    ("t01-g0", "Monthly Rainfall", "Average rainfall in millimetres by city",
     ["February", "City", "January"],
     [["90", "Lisbon", "110"], ["36", "Oslo", "49"], ["18", "Perth", "17"]]),
    ("t01-g1", "Updated: Monthly Rainfall", "Rainfall normals, revised",
     ["City", "January", "February", "March"],
     [["Lisbon", "110", "90", "69"], ["Oslo", "49", "36", "47"],
      ["Perth", "17", "18", "21"]]),
    ("t02-g0", "Updated: Stadium Capacity", "Stadium list after expansion",
     ["Stadium", "City", "Capacity"],
     [["Camp Nou", "Barcelona", "105000"],
      ["Wembley", "London", "90000"],
      ["Signal Iduna Park", "Dortmund", "81365"]]),
    ("t02-g1", "Stadium Capacity", "Largest football stadiums in Europe",
     ["Stadium", "Capacity"],
     [["Camp Nou", "99354"], ["Wembley", "90000"],
      ["Signal Iduna Park", "81365"]]),
    ("t03-g0", "Marathon Results", "Finishing times for elite runners",
     ["Time", "Runner", "Country"],
     [["2:02:37", "Kipchoge", "Kenya"],
      ["2:03:03", "Bekele", "Ethiopia"],
      ["2:04:55", "Kipruto", "Kenya"]]),
    ("t03-g1", "Elite Finisher Board", "Podium for the spring classic",
     ["Athlete", "Nation", "Finish"],
     [["Chebet", "Kenya", "2:05:16"], ["Geremew", "Ethiopia", "2:05:29"],
      ["Tola", "Ethiopia", "2:06:12"]]),
    ("t04-g0", "Cheese Exports", "Annual cheese exports by country",
     ["Country", "Tonnes", "Year", "Share"],
     [["Netherlands", "950000", "2023", "18%"],
      ["Germany", "880000", "2023", "16%"],
      ["France", "690000", "2023", "13%"]]),
    ("t04-g1", "Cheese Exports", "Annual cheese exports by country",
     ["Exporter", "Tonnes", "Year"],
     [["NETHERLANDS", "950000", "2023"],
      ["GERMANY", "880000", "2023"],
      ["FRANCE", "690000", "2023"]]),
]

PAIRS = [
    ("t01", "t01-g0", ["Reordering"], 101),
    ("t01", "t01-g1", ["Concatenation", "Update"], 102),
    ("t02", "t02-g0", ["Update"], 103),
    ("t02", "t02-g1", ["Removal"], 104),
    ("t03", "t03-g0", ["Reordering"], 105),
    ("t03", "t03-g1", ["Edit", "Update"], 106),
    ("t04", "t04-g0", ["Concatenation"], 107),
    ("t04", "t04-g1", ["Calculation", "Edit"], 108),
]

SPLITS = {"train": ["t01"], "validation": ["t02"], "test": ["t03", "t04"]}

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def derive_seed(master, *parts):
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(master)).encode("utf-8"))
    for p in parts:
        h.update(b"\x1f")
        h.update(str(p).encode("utf-8"))
    return int.from_bytes(h.digest(), "little") >> 1


def embed_text(text, dimension, seed):
    v = np.zeros(dimension, dtype=np.float64)
    for token in _TOKEN_RE.findall(text.lower()):
        digest = hashlib.blake2b(
            f"{seed}\x1f{token}".encode("utf-8"), digest_size=9
        ).digest()
        index = int.from_bytes(digest[:8], "little") % dimension
        v[index] += 1.0 if digest[8] & 1 else -1.0
    norm = float(np.linalg.norm(v))
    if norm > 0.0:
        v /= norm
    return v


def table_text(record, row_seed):
    _, title, _, cols, rows = record
    row = rows[random.Random(row_seed).randrange(len(rows))] if rows else ()
    text = title + ". " + ", ".join(cols) + ". " + ", ".join(row)
    tokens = text.split()
    if len(tokens) > TOKEN_CAP:
        text = " ".join(tokens[:TOKEN_CAP])
    return text


def ndcg(ranked_ids, relevant, k):
    dcg = sum(
        1.0 / math.log2(i + 1)
        for i, rid in enumerate(ranked_ids[:k], start=1)
        if rid in relevant
    )
    ideal = min(len(relevant), k)
    idcg = sum(1.0 / math.log2(i + 1) for i in range(1, ideal + 1))
    return dcg / idcg


def compute_report():
    eval_seed = derive_seed(SEED, "eval")
    feature_seed = derive_seed(SEED, "features")

    anchor_of = {target: anchor for anchor, target, _, _ in PAIRS}
    test_anchors = set(SPLITS["test"])
    pool = [
        rec
        for rec in ORIGINALS + TARGETS
        if rec[0] not in anchor_of or anchor_of[rec[0]] in test_anchors
    ]
    relevant_by_anchor = {}
    pool_ids = {rec[0] for rec in pool}
    for anchor, target, _, _ in PAIRS:
        if anchor in test_anchors and target in pool_ids:
            relevant_by_anchor.setdefault(anchor, set()).add(target)

    vectors = np.stack([
        embed_text(
            table_text(rec, derive_seed(eval_seed, "embed-row", rec[0])),
            DIMENSION,
            feature_seed,
        )
        for rec in pool
    ])
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    matrix = vectors / np.where(norms > 0.0, norms, 1.0)
    ids_arr = np.array([rec[0] for rec in pool])
    by_id = {rec[0]: rec for rec in ORIGINALS + TARGETS}

    metric_order = [f"{m}@{k}" for k in KS for m in ("recall", "ndcg")]
    per_query = {}
    for anchor in sorted(relevant_by_anchor):
        relevant = relevant_by_anchor[anchor]
        q = embed_text(
            table_text(
                by_id[anchor], derive_seed(eval_seed, "embed-row", anchor)
            ),
            DIMENSION,
            feature_seed,
        )
        qn = float(np.linalg.norm(q))
        scores = matrix @ (q / qn) if qn > 0.0 else np.zeros(len(pool))
        order = np.lexsort((ids_arr, -scores))
        ranked_ids = [
            ids_arr[int(i)] for i in order if ids_arr[int(i)] != anchor
        ][: max(KS)]
        metrics = {}
        for k in KS:
            hits = sum(1 for rid in ranked_ids[:k] if rid in relevant)
            metrics[f"recall@{k}"] = hits / len(relevant)
            metrics[f"ndcg@{k}"] = ndcg(ranked_ids, relevant, k)
        per_query[anchor] = metrics

    aggregates = {
        m: sum(q[m] for q in per_query.values()) / len(per_query)
        for m in metric_order
    }
    return per_query, aggregates, metric_order


def write_fixtures(out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    with (out_dir / "golden_corpus.jsonl").open("w", encoding="utf-8") as f:
        for tid, title, desc, cols, rows in ORIGINALS + TARGETS:
            f.write(json.dumps({
                "id": tid,
                "title": title,
                "description": desc,
                "column_names": cols,
                "rows": rows,
            }, ensure_ascii=False) + "\n")

    with (out_dir / "golden_pairs.jsonl").open("w", encoding="utf-8") as f:
        for anchor, target, plan, seed in PAIRS:
            f.write(json.dumps({
                "anchor_id": anchor,
                "target_id": target,
                "relation": "similar",
                "plan": plan,
                "seed": seed,
            }, ensure_ascii=False) + "\n")

    (out_dir / "golden_splits.json").write_text(
        json.dumps(SPLITS, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )

    per_query, aggregates, metric_order = compute_report()
    report = {
        "aggregates": {
            m: round(aggregates[m], DECIMALS) for m in metric_order
        },
        "per_query": {
            qid: {
                m: round(per_query[qid][m], DECIMALS) for m in metric_order
            }
            for qid in sorted(per_query)
        },
    }
    (out_dir / "golden_eval_report.json").write_text(
        json.dumps(report, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )
    with (out_dir / "golden_eval_report.csv").open(
        "w", encoding="utf-8", newline=""
    ) as f:
        writer = csv.writer(f)
        writer.writerow(["query_id", *metric_order])
        for qid in sorted(per_query):
            writer.writerow(
                [qid, *(f"{per_query[qid][m]:.9f}" for m in metric_order)]
            )
    return report


def main():
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else DEFAULT_OUT
    report = write_fixtures(out_dir)
    print(json.dumps({
        "out": str(out_dir),
        "aggregates": report["aggregates"],
    }))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
