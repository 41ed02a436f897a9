"""SC vs CSBC on synthetic worlds, one row per (seed, descriptor).

    python3 scripts/direction_experiment.py --seeds 0 1 2 --descriptors hog gray
"""
import argparse
import time

import numpy as np

from csbc.experiments import ExperimentConfig, run_direction_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=list(range(10)))
    ap.add_argument("--descriptors", nargs="+", default=["hog", "glcm", "gray", "hog+glcm"])
    ap.add_argument("--train", type=int, default=200)
    ap.add_argument("--test", type=int, default=100)
    ap.add_argument("--components", type=int, default=5)
    args = ap.parse_args()

    cfg = ExperimentConfig(n_train=args.train, n_test=args.test, components=args.components)
    rows = []
    start = time.perf_counter()
    print(f"{'seed':>4} {'descriptor':>10} {'root':>7} {'sc':>7} {'csbc':>7} {'gain':>7}")
    for seed in args.seeds:
        for r in run_direction_experiment(seed, args.descriptors, cfg):
            rows.append(r)
            print(f"{r.seed:>4} {r.descriptor:>10} {r.lamr_root:7.2f} {r.lamr_sc:7.2f} "
                  f"{r.lamr_csbc:7.2f} {r.improvement:7.2f}", flush=True)

    print()
    for name in args.descriptors:
        rs = [r for r in rows if r.descriptor == name]
        wins = sum(r.lamr_csbc <= r.lamr_sc for r in rs)
        print(f"{name:>10}: mean csbc {np.mean([r.lamr_csbc for r in rs]):.2f}  "
              f"mean gain {np.mean([r.improvement for r in rs]):.2f}  csbc<=sc {wins}/{len(rs)}")
    print(f"{time.perf_counter() - start:.1f} s")


if __name__ == "__main__":
    main()
