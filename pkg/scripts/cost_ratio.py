"""Mean J / log(1/delta) against T* for shrinking delta on a two-arm instance.

    python3 scripts/cost_ratio.py --runs 300
"""

import argparse
import math

import numpy as np

from cabai import BanditInstance, PolicyConfig, RewardFamily, compute_proportions, run_batch


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=300)
    ap.add_argument("--deltas", default="1e-2,1e-4,1e-6,1e-8")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    inst = BanditInstance(RewardFamily("gaussian"), [1.0, 0.0], [1.0, 0.25])
    t_star = compute_proportions(inst).t_star
    deltas = [float(x) for x in args.deltas.split(",")]
    print(f"T* = {t_star:.4f}")
    print(f"{'policy':8} " + " ".join(f"{d:>9.0e}" for d in deltas))
    for kind in ("ctas", "tas", "co"):
        recs = run_batch(inst, [PolicyConfig(kind)], deltas, args.runs, 606, args.workers,
                         checkpoints=None)
        row = []
        for d in deltas:
            costs = [r.total_cost for r in recs if r.delta == d and not r.censored]
            row.append(np.mean(costs) / math.log(1 / d))
        print(f"{kind:8} " + " ".join(f"{x:9.3f}" for x in row))


if __name__ == "__main__":
    main()
