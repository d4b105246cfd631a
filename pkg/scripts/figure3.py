"""Run a three-arm experiment config and write plot-ready series.

Runs ``cabai run`` then ``cabai summarize`` on the config, which leaves
timeseries.csv (mean N_a(t) over surviving runs) and cost_boxplot.csv in the
results directory.

    python3 scripts/figure3.py configs/figure3_poisson.yaml --runs 1000
"""

import argparse
import sys

from cabai.cli import load_config, main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--out")
    ap.add_argument("--runs", type=int)
    ap.add_argument("--workers", type=int)
    args = ap.parse_args()
    cfg, _ = load_config(args.config)
    out = args.out or cfg.out or "results"
    argv = ["run", "--config", args.config, "--out", out]
    if args.runs:
        argv += ["--n-runs", str(args.runs)]
    if args.workers:
        argv += ["--workers", str(args.workers)]
    code = cli(argv)
    if code not in (0, 3):  # 3: some runs failed, still summarize the rest
        return code
    return cli(["summarize", out])


if __name__ == "__main__":
    sys.exit(main())
