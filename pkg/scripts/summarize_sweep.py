"""Median table of one sweep CSV: one row per (variant, t), one column per lambda.

    python3 scripts/summarize_sweep.py runs/small/quality.csv approximation_gap
"""
import argparse
import sys

import numpy as np

from tempered_ot.experiments import read_csv


def table(text, column):
    schema, rows = read_csv(text)
    groups = {}
    for r in rows:
        key = (r.get("variant", ""), float(r["t"]))
        groups.setdefault(key, {}).setdefault(float(r["lambda"]), []).append(float(r[column]))
    lambdas = sorted({lam for g in groups.values() for lam in g})
    lines = [f"# {schema}: median {column}",
             "variant  t      " + " ".join(f"{lam:>10.3g}" for lam in lambdas)]
    for (variant, t), g in sorted(groups.items()):
        cells = []
        for lam in lambdas:
            vals = np.array(g.get(lam, [np.nan]))
            vals = vals[np.isfinite(vals)]
            cells.append(f"{np.median(vals):>10.3e}" if vals.size else f"{'nan':>10}")
        lines.append(f"{variant:<8} {t:<6.3g} " + " ".join(cells))
    return "\n".join(lines)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("csv")
    p.add_argument("column")
    args = p.parse_args()
    with open(args.csv) as fh:
        text = fh.read()
    try:
        print(table(text, args.column))
    except KeyError:
        sys.exit(f"column {args.column!r} not in {args.csv}")


if __name__ == "__main__":
    main()
