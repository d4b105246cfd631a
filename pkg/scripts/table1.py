"""Pull fractions at stopping and per-decision compute time on the three-arm instance.

    python3 scripts/table1.py --runs 500 --workers 1
"""

import argparse
import time

import numpy as np

from cabai import BanditInstance, PolicyConfig, RewardFamily, compute_proportions, run_batch


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=500)
    ap.add_argument("--delta", type=float, default=1e-6)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--family", default="gaussian", choices=["gaussian", "poisson"])
    args = ap.parse_args()

    inst = BanditInstance(RewardFamily(args.family), [1.5, 1.0, 0.5], [1.0, 0.1, 0.01],
                          instance_id="table1")
    props = compute_proportions(inst)
    print(f"oracle pull fractions {np.round(props.pull_fractions, 4)}  T*={props.t_star:.3f}")
    print(f"{'policy':8} {'arm 1':>7} {'arm 2':>7} {'arm 3':>7} {'mean J':>9} {'err':>6} "
          f"{'us/dec':>8} {'wall s':>7}")
    for kind in ("ctas", "tas", "co", "uniform"):
        t0 = time.perf_counter()
        recs = run_batch(inst, [PolicyConfig(kind)], [args.delta], args.runs, args.seed,
                         args.workers, checkpoints=None)
        wall = time.perf_counter() - t0
        recs = [r for r in recs if r.error is None and not r.censored]
        frac = np.mean([np.array(r.counts) / r.tau for r in recs], axis=0)
        cost = np.mean([r.total_cost for r in recs])
        err = np.mean([not r.correct for r in recs])
        us = 1e6 * sum(r.compute_seconds for r in recs) / sum(r.tau for r in recs)
        print(f"{kind:8} {frac[0]:7.3f} {frac[1]:7.3f} {frac[2]:7.3f} {cost:9.1f} {err:6.3f} "
              f"{us:8.1f} {wall:7.1f}")


if __name__ == "__main__":
    main()
