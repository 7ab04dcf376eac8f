#!/usr/bin/env python3
"""Convert a BIRD- or Spider-style dataset export to the JSONL the `link`
command consumes.

Input: a JSON array where each entry has at least `question` and `db_id`.
BIRD entries carry `evidence` (external knowledge) and `SQL`; Spider entries
carry `query`. Output: one JSON object per line with the keys
instance_id, question, database, and optionally external_knowledge, gold_sql.

Usage:
  scripts/convert_bird.py dev.json dataset.jsonl [--prefix bird]
"""

import argparse
import json
import sys


def convert(entries, prefix):
    for i, e in enumerate(entries):
        out = {
            "instance_id": f"{prefix}_{e.get('question_id', i)}",
            "question": e["question"].strip(),
            "database": e["db_id"],
        }
        evidence = (e.get("evidence") or "").strip()
        if evidence:
            out["external_knowledge"] = evidence
        sql = (e.get("SQL") or e.get("query") or "").strip()
        if sql:
            out["gold_sql"] = sql
        yield out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("input")
    ap.add_argument("output")
    ap.add_argument("--prefix", default="bird", help="instance id prefix")
    args = ap.parse_args()

    with open(args.input) as f:
        entries = json.load(f)
    if not isinstance(entries, list):
        sys.exit("expected a JSON array of instances")

    seen = set()
    n = 0
    with open(args.output, "w") as f:
        for rec in convert(entries, args.prefix):
            if rec["instance_id"] in seen:
                sys.exit(f"duplicate instance id {rec['instance_id']}")
            seen.add(rec["instance_id"])
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")
            n += 1
    print(f"wrote {n} instances -> {args.output}")


if __name__ == "__main__":
    main()
