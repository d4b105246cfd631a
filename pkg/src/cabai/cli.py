"""Command line entry point: ``cabai {oracle,lower-bound,run,summarize}``.

Experiment configs are YAML::

    instance:
      id: table1
      family: gaussian        # gaussian | bernoulli | poisson
      sigma: 1.0              # gaussian only
      means: [1.5, 1.0, 0.5]
      costs: [1, 0.1, 0.01]   # a number is a deterministic cost, or
                              # {mean: 0.5, kind: uniform, half_width: 0.2}
      ell: 0.01               # optional, defaults to the lowest cost support
    policies:
      - kind: ctas            # ctas | tas | co | uniform
      - {kind: co, name: co_explore, exploration: 2.0, alpha: 1.0, B: auto}
    deltas: [1.0e-6]
    n_runs: 1000
    base_seed: 0
    tau_max: 1000000
    checkpoints: auto         # auto | none | [128, 256, ...]
    stopping: true
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .engine import (ConfigError, DEFAULT_TAU_MAX, geometric_checkpoints, pull_count_series,
                     read_records_csv, read_snapshots_csv, run_batch, summarize, write_records_csv,
                     write_snapshots_csv)
from .exp_family import BanditInstance, CostModel, DomainError, RewardFamily, binary_kl
from .oracle import OracleError, compute_proportions
from .policies import PolicyConfig

WORKERS_ENV = "CABAI_WORKERS"
MANIFEST = "manifest.json"


# -- config ----------------------------------------------------------------------


def _num(value, where):
    try:
        return float(value)  # YAML 1.1 reads "1e-6" as a string
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a number, got {value!r}") from None


def _cost_model(item, where):
    if isinstance(item, dict):
        unknown = set(item) - {"mean", "kind", "half_width"}
        if unknown:
            raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
        return CostModel(_num(item.get("mean"), f"{where}.mean"), item.get("kind", "deterministic"),
                         _num(item.get("half_width", 0.0), f"{where}.half_width"))
    return CostModel(_num(item, where))


def instance_from_dict(d) -> BanditInstance:
    if not isinstance(d, dict):
        raise ConfigError("instance: expected a mapping")
    unknown = set(d) - {"id", "family", "sigma", "means", "costs", "ell"}
    if unknown:
        raise ConfigError(f"instance: unknown keys {sorted(unknown)}")
    for key in ("means", "costs"):
        if not isinstance(d.get(key), list):
            raise ConfigError(f"instance.{key}: expected a list")
    try:
        family = RewardFamily(d.get("family", "gaussian"), _num(d.get("sigma", 1.0), "instance.sigma"))
        means = tuple(_num(m, f"instance.means[{i}]") for i, m in enumerate(d["means"]))
        costs = tuple(_cost_model(c, f"instance.costs[{i}]") for i, c in enumerate(d["costs"]))
        ell = None if d.get("ell") is None else _num(d["ell"], "instance.ell")
        return BanditInstance(family, means, costs, ell, instance_id=str(d.get("id", "instance")))
    except DomainError as exc:
        raise ConfigError(f"instance: {exc}") from None


def instance_to_dict(inst: BanditInstance) -> dict:
    return {
        "id": inst.instance_id, "family": inst.family.kind, "sigma": inst.family.sigma,
        "means": list(inst.means),
        "costs": [c.mean if c.kind == "deterministic" else
                  {"mean": c.mean, "kind": c.kind, "half_width": c.half_width} for c in inst.costs],
        "ell": inst.ell,
    }


def _policy(item, where) -> PolicyConfig:
    if isinstance(item, str):
        item = {"kind": item}
    if not isinstance(item, dict):
        raise ConfigError(f"{where}: expected a mapping or a policy name")
    allowed = {"kind", "name", "alpha", "B", "exploration", "oracle_tol", "recompute_period"}
    unknown = set(item) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kw = dict(item)
    for key in ("alpha", "exploration", "oracle_tol"):
        if key in kw:
            kw[key] = _num(kw[key], f"{where}.{key}")
    if "B" in kw and kw["B"] != "auto":
        kw["B"] = _num(kw["B"], f"{where}.B")
    if "recompute_period" in kw:
        kw["recompute_period"] = int(_num(kw["recompute_period"], f"{where}.recompute_period"))
    try:
        return PolicyConfig(**kw)
    except DomainError as exc:
        raise ConfigError(f"{where}: {exc}") from None


@dataclass
class ExperimentConfig:
    instance: BanditInstance
    policies: list[PolicyConfig]
    deltas: list[float]
    n_runs: int = 100
    base_seed: int = 0
    tau_max: int = DEFAULT_TAU_MAX
    checkpoints: list[int] | None = field(default=None)
    stopping: bool = True
    out: str | None = None

    @classmethod
    def from_dict(cls, d) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config: expected a mapping at top level")
        unknown = set(d) - {"instance", "policies", "deltas", "n_runs", "base_seed", "tau_max",
                            "checkpoints", "stopping", "out"}
        if unknown:
            raise ConfigError(f"config: unknown keys {sorted(unknown)}")
        for key in ("instance", "policies", "deltas"):
            if key not in d:
                raise ConfigError(f"config: missing required key {key!r}")
        instance = instance_from_dict(d["instance"])
        if not isinstance(d["policies"], list) or not d["policies"]:
            raise ConfigError("policies: expected a nonempty list")
        policies = [_policy(p, f"policies[{i}]") for i, p in enumerate(d["policies"])]
        labels = [p.label for p in policies]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"policies: labels must be unique, got {labels}")
        for i, p in enumerate(policies):
            try:
                p.resolve_B(instance.K)
            except ValueError as exc:
                raise ConfigError(f"policies[{i}]: {exc}") from None
        deltas = d["deltas"] if isinstance(d["deltas"], list) else [d["deltas"]]
        deltas = [_num(x, f"deltas[{i}]") for i, x in enumerate(deltas)]
        if not deltas or not all(0.0 < x < 1.0 for x in deltas):
            raise ConfigError("deltas: every delta must lie in (0, 1)")
        n_runs = int(_num(d.get("n_runs", 100), "n_runs"))
        if n_runs < 1:
            raise ConfigError("n_runs: must be at least 1")
        tau_max = int(_num(d.get("tau_max", DEFAULT_TAU_MAX), "tau_max"))
        if tau_max < instance.K:
            raise ConfigError("tau_max: must be at least K")
        cps = d.get("checkpoints", "auto")
        if cps == "auto":
            cps = geometric_checkpoints(tau_max)
        elif cps in (None, "none"):
            cps = None
        elif isinstance(cps, list):
            cps = sorted(int(_num(c, "checkpoints")) for c in cps)
        else:
            raise ConfigError("checkpoints: expected auto, none or a list of integers")
        stopping = d.get("stopping", True)
        if not isinstance(stopping, bool):
            raise ConfigError("stopping: expected true or false")
        return cls(instance, policies, deltas, n_runs, int(_num(d.get("base_seed", 0), "base_seed")),
                   tau_max, cps, stopping, None if d.get("out") is None else str(d["out"]))

    def to_dict(self) -> dict:
        return {
            "instance": instance_to_dict(self.instance),
            "policies": [asdict(p) for p in self.policies],
            "deltas": self.deltas, "n_runs": self.n_runs, "base_seed": self.base_seed,
            "tau_max": self.tau_max, "checkpoints": self.checkpoints, "stopping": self.stopping,
            "out": self.out,
        }


def load_config(path) -> tuple[ExperimentConfig, dict]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    try:
        return ExperimentConfig.from_dict(raw), raw
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


# -- output helpers --------------------------------------------------------------


def _fmt_cell(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt_cell(x) for x in v) + "]"
    return str(v)


def render(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, indent=2)
    if not rows:
        return ""
    cols = list(rows[0])
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([repr(r[c]) if isinstance(r[c], float) else _fmt_cell(r[c]) for c in cols])
        return buf.getvalue().rstrip("\n")
    cells = [[_fmt_cell(r[c]) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(wd) for c, wd in zip(cols, widths))]
    lines += ["  ".join(x.ljust(wd) for x, wd in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def _csv_list(text, cast=float):
    return [cast(x) for x in text.split(",") if x.strip()]


def _instance_from_args(args) -> BanditInstance:
    if args.config:
        cfg, _ = load_config(args.config)
        return cfg.instance
    if not (args.means and args.costs):
        raise ConfigError("give --config or both --means and --costs")
    return instance_from_dict({"family": args.family, "sigma": args.sigma,
                               "means": _csv_list(args.means), "costs": _csv_list(args.costs)})


def _fname(kind, label, delta):
    return f"{kind}_{label}_d{delta:g}.csv"


# -- subcommands -----------------------------------------------------------------


def cmd_oracle(args) -> int:
    inst = _instance_from_args(args)
    props = compute_proportions(inst, tol=args.tol)
    deltas = _csv_list(args.delta)
    rows = [{"arm": a + 1, "mean": inst.means[a], "cost": inst.cost_means[a], "w": float(props.w[a]),
             "pull_fraction": float(props.pull_fractions[a])} for a in range(inst.K)]
    bounds = [{"delta": d, "kl_factor": binary_kl(d, 1 - d),
               "lower_bound": props.t_star * binary_kl(d, 1 - d),
               "asymptotic": props.t_star * math.log(1 / d)} for d in deltas]
    if args.format == "json":
        print(json.dumps({"best_arm": props.best_arm + 1, "t_star": props.t_star,
                          "y_star": props.y_star, "arms": rows, "bounds": bounds}, indent=2))
        return 0
    print(render(rows, args.format))
    print()
    print(render([{"t_star": props.t_star, "y_star": props.y_star, "best_arm": props.best_arm + 1}],
                 args.format))
    print()
    print(render(bounds, args.format))
    return 0


def cmd_lower_bound(args) -> int:
    inst = _instance_from_args(args)
    props = compute_proportions(inst)
    rows = [{"delta": d, "t_star": props.t_star, "kl_factor": binary_kl(d, 1 - d),
             "lower_bound": props.t_star * binary_kl(d, 1 - d),
             "asymptotic": props.t_star * math.log(1 / d)} for d in _csv_list(args.delta)]
    print(render(rows, args.format))
    return 0


def _workers(args) -> int:
    if args.workers is not None:
        return args.workers
    return int(os.environ.get(WORKERS_ENV, "1"))


def cmd_run(args) -> int:
    cfg, _ = load_config(args.config)
    if args.seed is not None:
        cfg.base_seed = args.seed
    if args.n_runs is not None:
        if args.n_runs < 1:
            raise ConfigError("--n-runs must be at least 1")
        cfg.n_runs = args.n_runs
    out = Path(args.out or cfg.out or "results")
    out.mkdir(parents=True, exist_ok=True)
    workers = _workers(args)
    files, timing, errors = [], {}, []
    for pcfg in cfg.policies:
        t0 = time.perf_counter()
        records = run_batch(cfg.instance, [pcfg], cfg.deltas, cfg.n_runs, cfg.base_seed, workers,
                            cfg.tau_max, cfg.checkpoints, cfg.stopping)
        wall = time.perf_counter() - t0
        ok = [r for r in records if r.error is None]
        errors += [r for r in records if r.error is not None]
        timing[pcfg.label] = {"wall_seconds": wall,
                              "compute_seconds": sum(r.compute_seconds for r in ok),
                              "decisions": sum(r.tau for r in ok)}
        for d in cfg.deltas:
            group = [r for r in ok if r.delta == d]
            rec_name, snap_name = _fname("records", pcfg.label, d), _fname("snapshots", pcfg.label, d)
            write_records_csv(out / rec_name, group, cfg.instance.K)
            write_snapshots_csv(out / snap_name, group)
            files.append({"policy": pcfg.label, "delta": d, "records": rec_name, "snapshots": snap_name})
        print(f"{pcfg.label}: {len(ok)} runs in {wall:.1f}s", file=sys.stderr)
    if errors:
        with open(out / "errors.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["policy", "delta", "seed", "error"])
            for r in errors:
                w.writerow([r.policy, repr(r.delta), r.seed, r.error])
    manifest = {"tool": "cabai", "version": __version__, "config": cfg.to_dict(),
                "workers": workers, "files": files, "timing": timing, "n_errors": len(errors)}
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2))
    print(out)
    return 0 if not errors else 3


def cmd_summarize(args) -> int:
    root = Path(args.results_dir)
    try:
        manifest = json.loads((root / MANIFEST).read_text())
        cfg = ExperimentConfig.from_dict(manifest["config"])
    except (OSError, ValueError, KeyError) as exc:
        print(f"{root / MANIFEST}: {exc}", file=sys.stderr)
        return 2
    inst = cfg.instance
    props = compute_proportions(inst)
    summary, fractions, boxes, series, failed = [], [], [], [], 0
    for entry in manifest["files"]:
        try:
            records = read_records_csv(root / entry["records"])
            snaps = read_snapshots_csv(root / entry["snapshots"])
        except (OSError, ValueError) as exc:
            print(f"skipping {entry['records']}: {exc}", file=sys.stderr)
            failed += 1
            continue
        if not records:
            print(f"skipping {entry['records']}: no records", file=sys.stderr)
            failed += 1
            continue
        for r in records:
            r.snapshots = snaps.get(r.seed, [])
        s = summarize(records, inst, props)
        summary.append({"policy": s.policy, "delta": s.delta, "n_runs": s.n_runs,
                        "n_censored": s.n_censored, "error_rate": s.error_rate,
                        "mean_cost": s.mean_cost, "median_cost": s.median_cost,
                        "cost_q05": s.cost_q05, "cost_q95": s.cost_q95, "mean_tau": s.mean_tau,
                        "cost_ratio": s.cost_ratio, "lower_bound": s.lower_bound,
                        "pull_fractions": list(s.mean_pull_fractions)})
        for a in range(inst.K):
            fractions.append({"policy": s.policy, "delta": s.delta, "arm": a + 1,
                              "pull_fraction": s.mean_pull_fractions[a],
                              "cost_fraction": s.mean_cost_fractions[a],
                              "oracle_pull_fraction": float(props.pull_fractions[a]),
                              "oracle_w": float(props.w[a])})
        costs = np.array([r.total_cost for r in records if not r.censored])
        if costs.size:
            q = np.quantile(costs, [0, 0.05, 0.25, 0.5, 0.75, 0.95, 1])
            boxes.append({"policy": s.policy, "delta": s.delta,
                          **dict(zip(["min", "q05", "q25", "median", "q75", "q95", "max"],
                                     (float(x) for x in q)))})
        for point in pull_count_series(records):
            for a in range(inst.K):
                series.append({"policy": s.policy, "delta": s.delta, "t": point["t"],
                               "survivors": point["survivors"], "arm": a + 1,
                               "mean_count": point["mean_counts"][a]})
    timing = [{"policy": p, "compute_seconds": v["compute_seconds"], "wall_seconds": v["wall_seconds"],
               "decisions": v["decisions"],
               "us_per_decision": 1e6 * v["compute_seconds"] / max(v["decisions"], 1)}
              for p, v in manifest.get("timing", {}).items()]
    for name, rows in [("summary.csv", summary), ("pull_fractions.csv", fractions),
                       ("cost_boxplot.csv", boxes), ("timeseries.csv", series),
                       ("timing.csv", timing)]:
        (root / name).write_text(render(rows, "csv") + "\n" if rows else "")
    if args.format == "json":
        print(json.dumps({"summary": summary, "timing": timing}, indent=2))
    else:
        print(render(summary, args.format))
        print()
        print(render(timing, args.format))
    return 0 if not failed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cabai", description="Cost-aware best arm identification")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def instance_args(p):
        p.add_argument("--config", help="YAML experiment config (its instance section is used)")
        p.add_argument("--family", default="gaussian", choices=["gaussian", "bernoulli", "poisson"])
        p.add_argument("--sigma", type=float, default=1.0)
        p.add_argument("--means", help="comma separated reward means")
        p.add_argument("--costs", help="comma separated (deterministic) costs")
        p.add_argument("--delta", default="0.1,0.01,1e-6", help="comma separated confidence levels")
        p.add_argument("--format", choices=["table", "csv", "json"], default="table")

    p = sub.add_parser("oracle", help="optimal proportions, T* and lower bounds")
    instance_args(p)
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("lower-bound", help="T* d(delta, 1-delta) for a list of deltas")
    instance_args(p)
    p.set_defaults(func=cmd_lower_bound)

    p = sub.add_parser("run", help="run a Monte-Carlo experiment from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (default: config 'out' or ./results)")
    p.add_argument("--workers", type=int, help=f"worker processes (default: ${WORKERS_ENV} or 1)")
    p.add_argument("--seed", type=int, help="override base_seed")
    p.add_argument("--n-runs", type=int, help="override n_runs")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("summarize", help="summary tables and plot data for a results directory")
    p.add_argument("results_dir")
    p.add_argument("--format", choices=["table", "csv", "json"], default="table")
    p.set_defaults(func=cmd_summarize)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OracleError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
