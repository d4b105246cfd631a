"""Cost proportions c_hat_a N_a / J against w* for CTAS with stopping disabled.

    python3 scripts/convergence.py --horizon 50000 --seeds 50
"""

import argparse

import numpy as np

from cabai import BanditInstance, PolicyConfig, RewardFamily, compute_proportions, run_batch
from cabai.engine import geometric_checkpoints


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--horizon", type=int, default=50_000)
    ap.add_argument("--seeds", type=int, default=50)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--tol", type=float, default=0.05)
    args = ap.parse_args()

    inst = BanditInstance(RewardFamily("gaussian"), [1.5, 1.0, 0.5], [1.0, 0.1, 0.01])
    w = compute_proportions(inst).w
    cps = geometric_checkpoints(args.horizon) + [args.horizon]
    recs = run_batch(inst, [PolicyConfig("ctas")], [0.1], args.seeds, 707, args.workers,
                     args.horizon, sorted(set(cps)), stopping=False)
    print(f"w* = {np.round(w, 4)}")
    print(f"{'t':>8} {'median dev':>11} {'max dev':>9} {'within tol':>11}")
    by_t = {}
    for r in recs:
        for t, _, cfrac in r.snapshots:
            by_t.setdefault(t, []).append(np.max(np.abs(np.array(cfrac) - w)))
    for t in sorted(by_t):
        d = np.array(by_t[t])
        print(f"{t:8d} {np.median(d):11.2e} {d.max():9.2e} {int((d <= args.tol).sum()):>6}/{d.size}")


if __name__ == "__main__":
    main()
