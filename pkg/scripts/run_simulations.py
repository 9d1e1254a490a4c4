"""Run the shipped simulation configs (both accuracy settings by default).

    python3 scripts/run_simulations.py                 # configs/high_accuracy.json and low_accuracy.json
    python3 scripts/run_simulations.py --reps 10 --workers 4
"""

import argparse
import time
from dataclasses import replace
from pathlib import Path

from multipool.cli import write_report
from multipool.config import ExperimentConfig
from multipool.simulate import run_experiment

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("configs", nargs="*",
                    default=[str(CONFIG_DIR / "high_accuracy.json"), str(CONFIG_DIR / "low_accuracy.json")])
    ap.add_argument("--reps", type=int)
    ap.add_argument("--workers", type=int)
    args = ap.parse_args()

    for path in args.configs:
        cfg = ExperimentConfig.load(path)
        if args.reps is not None:
            cfg = replace(cfg, repetitions=args.reps)
        if args.workers is not None:
            cfg = replace(cfg, workers=args.workers)
        t0 = time.perf_counter()
        report = run_experiment(cfg)
        for p in write_report(report, cfg.out_dir):
            print(f"wrote {p}")
        print(f"{path}: {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
