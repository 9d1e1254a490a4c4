"""PPV and NPV of a single assay against infection rate, one series per sensitivity."""

import argparse
import csv
from pathlib import Path

import numpy as np

from multipool import ppv_npv
from multipool.cli import fmt_measure


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--specificity", type=float, default=0.99)
    ap.add_argument("--sensitivities", type=float, nargs="+",
                    default=[0.75, 0.77, 0.79, 0.81, 0.83, 0.85, 0.87, 0.89, 0.90])
    ap.add_argument("--out-dir", default="results/predictive_values")
    args = ap.parse_args()

    rates = np.round(np.arange(0.001, 0.2005, 0.001), 3)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = ["rate"] + [f"se={s:g}" for s in args.sensitivities]
    for idx, name in enumerate(("ppv", "npv")):
        path = out / f"{name}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for p in rates:
                w.writerow([f"{p:g}"] + [fmt_measure(ppv_npv(float(p), se, args.specificity)[idx])
                                         for se in args.sensitivities])
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
