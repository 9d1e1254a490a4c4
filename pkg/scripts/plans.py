"""Print the expected multi-round plans for the two headline infection rates."""

import argparse
from pathlib import Path

from multipool import ErrorModel, build_plan, format_plan


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rates", type=float, nargs="+", default=[0.001, 0.01])
    ap.add_argument("--alpha", type=float, default=0.01)
    ap.add_argument("--beta", type=float, default=0.15)
    ap.add_argument("--population", type=float, default=100_000)
    ap.add_argument("--out-dir", default="results/plans")
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    err = ErrorModel(args.alpha, args.beta)
    for p in args.rates:
        doc = format_plan(build_plan(p, args.population, err))
        (out / f"plan_p{p:g}.txt").write_text(doc, encoding="utf-8")
        print(doc)


if __name__ == "__main__":
    main()
