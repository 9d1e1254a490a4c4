"""Round-1 optimal batch size and batch count over a grid of infection rates.

Writes one CSV per quantity with a column per false negative rate.
"""

import argparse
import csv
import math
from pathlib import Path

import numpy as np

from multipool import BatchingNotBeneficial, ErrorModel, ObjectiveSpec, optimal_batch_size


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, default=0.01)
    ap.add_argument("--betas", type=float, nargs="+", default=[0.10, 0.15, 0.20, 0.25])
    ap.add_argument("--population", type=int, default=100_000)
    ap.add_argument("--out-dir", default="results/batch_size_curve")
    args = ap.parse_args()

    rates = np.round(np.arange(0.001, 0.2505, 0.001), 3)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sizes, batches = [], []
    for p in rates:
        row_n, row_b = [f"{p:g}"], [f"{p:g}"]
        for b in args.betas:
            try:
                n = optimal_batch_size(ObjectiveSpec(float(p), ErrorModel(args.alpha, b))).n_star
            except BatchingNotBeneficial:
                row_n.append("NA")
                row_b.append("NA")
                continue
            row_n.append(str(n))
            row_b.append(str(math.ceil(args.population / n)))
        sizes.append(row_n)
        batches.append(row_b)

    header = ["rate"] + [f"beta={b:g}" for b in args.betas]
    for name, rows in (("optimal_batch_size.csv", sizes), ("batch_count.csv", batches)):
        with open(out / name, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        print(f"wrote {out / name}")


if __name__ == "__main__":
    main()
