"""Seeded trajectories, batches, summaries and the records CSV format."""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .exp_family import BanditInstance, sample_costs, sample_rewards
from .glr import EmpiricalState
from .oracle import OracleError, OptimalProportions, compute_proportions, lower_bound_cost
from .policies import PolicyConfig, make_policy

DEFAULT_TAU_MAX = 10**6
BLOCK = 256

RECORD_FIXED_COLUMNS = ["instance_id", "policy", "delta", "seed", "tau", "cost",
                        "decision", "correct", "censored"]
SNAPSHOT_COLUMNS = ["seed", "t", "arm", "pull_fraction", "cost_fraction"]


class TrajectoryError(RuntimeError):
    pass


class ConfigError(ValueError):
    pass


def geometric_checkpoints(tau_max: int, start_exp: int = 7) -> list[int]:
    out, t = [], 2**start_exp
    while t <= tau_max:
        out.append(t)
        t *= 2
    return out


def trajectory_seed(base_seed: int, index: int) -> int:
    """Seed of run ``index`` in a batch; independent of order and worker count."""
    ss = np.random.SeedSequence([int(base_seed), int(index)])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


@dataclass
class TrajectoryRecord:
    instance_id: str
    policy: str
    delta: float
    seed: int
    tau: int
    total_cost: float
    decision: int
    correct: bool
    counts: tuple[int, ...]
    cost_totals: tuple[float, ...]
    censored: bool
    snapshots: list = field(default_factory=list)  # (t, pull fractions, cost fractions)
    compute_seconds: float = 0.0  # time spent inside select/stop rules only
    log: list | None = None  # (arm, reward, cost) per pull, when requested
    error: str | None = None

    def key(self):
        """Everything except wall-clock time; equal keys mean identical runs."""
        return (self.instance_id, self.policy, self.delta, self.seed, self.tau, self.total_cost,
                self.decision, self.correct, self.counts, self.cost_totals, self.censored,
                tuple((t, tuple(p), tuple(c)) for t, p, c in self.snapshots), self.error)


class Environment:
    """Per-arm reward and cost sub-streams, so the k-th pull of an arm sees the
    same observation whichever policy is running."""

    def __init__(self, instance: BanditInstance, seed: int):
        self.instance = instance
        reward_ss, cost_ss = np.random.SeedSequence(int(seed)).spawn(2)
        K = instance.K
        self._reward_rngs = [np.random.Generator(np.random.Philox(s)) for s in reward_ss.spawn(K)]
        self._cost_rngs = [np.random.Generator(np.random.Philox(s)) for s in cost_ss.spawn(K)]
        self._rewards = [[] for _ in range(K)]
        self._costs = [[] for _ in range(K)]

    def pull(self, arm: int) -> tuple[float, float]:
        rewards, costs = self._rewards[arm], self._costs[arm]
        if not rewards:
            inst = self.instance
            rewards.extend(sample_rewards(inst.family, inst.means[arm], self._reward_rngs[arm], BLOCK)[::-1].tolist())
            costs.extend(sample_costs(inst.costs[arm], self._cost_rngs[arm], BLOCK)[::-1].tolist())
        return rewards.pop(), costs.pop()


class ReplayEnvironment:
    """Feeds a logged observation sequence back and checks the arm choices match."""

    def __init__(self, log):
        self._log = log
        self._i = 0

    def pull(self, arm: int) -> tuple[float, float]:
        if self._i >= len(self._log):
            raise TrajectoryError("replay ran past the end of the log")
        logged_arm, r, c = self._log[self._i]
        if logged_arm != arm:
            raise TrajectoryError(f"replay diverged at pull {self._i + 1}: {arm} vs logged {logged_arm}")
        self._i += 1
        return r, c


def _drive(policy, env, K, delta, tau_max, stopping, checkpoints, keep_log):
    state = EmpiricalState(K)
    log = [] if keep_log else None
    snapshots = []
    cps = list(checkpoints or [])[::-1]
    clock = time.perf_counter
    compute = 0.0

    def observe(arm):
        r, c = env.pull(arm)
        state.update(arm, r, c)
        if log is not None:
            log.append((arm, r, c))
        while cps and cps[-1] <= state.t:
            if cps.pop() == state.t:
                snapshots.append((state.t, tuple(n / state.t for n in state.counts),
                                  tuple(x / state.J for x in state.cost_totals)))

    for arm in range(K):
        observe(arm)
    stopped = False
    if stopping:
        t0 = clock()
        stopped = policy.should_stop(state, delta)
        compute += clock() - t0
    while not stopped and state.t < tau_max:
        t0 = clock()
        try:
            arm = policy.select(state)
        except OracleError as exc:
            raise TrajectoryError(
                f"oracle failed at t={state.t}: counts={state.counts}, "
                f"mean_reward={state.mean_reward}, mean_cost={state.mean_cost}: {exc}") from exc
        compute += clock() - t0
        observe(arm)
        if stopping:
            t0 = clock()
            stopped = policy.should_stop(state, delta)
            compute += clock() - t0
    censored = not stopped
    decision = policy.decide(state, censored=censored)
    return state, decision, censored, snapshots, compute, log


def run_trajectory(instance: BanditInstance, cfg: PolicyConfig, delta: float, seed: int,
                   tau_max: int = DEFAULT_TAU_MAX, checkpoints="auto", stopping: bool = True,
                   keep_log: bool = False) -> TrajectoryRecord:
    """One seeded run: pull each arm once, then select, observe, update, check stopping.

    ``stopping=False`` runs to ``tau_max`` (the record is then censored).
    ``checkpoints="auto"`` snapshots at t = 128, 256, ...
    """
    if tau_max < instance.K:
        raise ConfigError("tau_max must be at least K")
    if checkpoints == "auto":
        checkpoints = geometric_checkpoints(tau_max)
    policy = make_policy(cfg, instance.family, instance.K)
    env = Environment(instance, seed)
    state, decision, censored, snaps, compute, log = _drive(
        policy, env, instance.K, delta, tau_max, stopping, checkpoints, keep_log)
    return TrajectoryRecord(
        instance_id=instance.instance_id, policy=cfg.label, delta=delta, seed=int(seed),
        tau=state.t, total_cost=state.J, decision=decision,
        correct=decision == instance.best_arm, counts=tuple(state.counts),
        cost_totals=tuple(state.cost_totals), censored=censored, snapshots=snaps,
        compute_seconds=compute, log=log)


def replay(record: TrajectoryRecord, instance: BanditInstance, cfg: PolicyConfig) -> tuple[int, int]:
    """Re-run fresh policy logic on a logged record; returns (tau, decision)."""
    if record.log is None:
        raise ValueError("record has no observation log (run with keep_log=True)")
    policy = make_policy(cfg, instance.family, instance.K)
    stopping = not record.censored
    state, decision, _, _, _, _ = _drive(policy, ReplayEnvironment(record.log), instance.K,
                                         record.delta, record.tau, stopping, None, False)
    return state.t, decision


def _run_task(task):
    instance, cfg, delta, index, base_seed, tau_max, checkpoints, stopping = task
    seed = trajectory_seed(base_seed, index)
    try:
        return run_trajectory(instance, cfg, delta, seed, tau_max, checkpoints, stopping)
    except Exception as exc:  # reported per run, the batch carries on
        K = instance.K
        return TrajectoryRecord(instance.instance_id, cfg.label, delta, seed, 0, 0.0, -1, False,
                                (0,) * K, (0.0,) * K, True, error=f"{type(exc).__name__}: {exc}")


def run_batch(instance: BanditInstance, policy_cfgs, deltas, n_runs: int, base_seed: int = 0,
              parallelism: int = 1, tau_max: int = DEFAULT_TAU_MAX, checkpoints="auto",
              stopping: bool = True) -> list[TrajectoryRecord]:
    """Cross product of policies x deltas x runs.

    Run ``i`` uses ``trajectory_seed(base_seed, i)`` for every policy and delta
    (common random numbers). Output order is (policy, delta, run).
    """
    if isinstance(policy_cfgs, PolicyConfig):
        policy_cfgs = [policy_cfgs]
    if isinstance(deltas, (int, float)):
        deltas = [deltas]
    if n_runs < 1:
        raise ConfigError("n_runs must be at least 1")
    if not policy_cfgs or not deltas:
        raise ConfigError("need at least one policy and one delta")
    for d in deltas:
        if not 0.0 < d < 1.0:
            raise ConfigError(f"delta must lie in (0, 1), got {d}")
    for cfg in policy_cfgs:
        cfg.resolve_B(instance.K)
    if tau_max < instance.K:
        raise ConfigError("tau_max must be at least K")
    tasks = [(instance, cfg, d, i, base_seed, tau_max, checkpoints, stopping)
             for cfg in policy_cfgs for d in deltas for i in range(n_runs)]
    if parallelism <= 1:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        chunk = max(1, len(tasks) // (4 * parallelism))
        return list(pool.map(_run_task, tasks, chunksize=chunk))


@dataclass
class BatchSummary:
    instance_id: str
    policy: str
    delta: float
    n_runs: int
    n_completed: int
    n_censored: int
    n_errors: int
    error_rate: float
    mean_cost: float
    median_cost: float
    cost_q05: float
    cost_q95: float
    mean_tau: float
    mean_pull_fractions: tuple[float, ...]
    mean_cost_fractions: tuple[float, ...]
    t_star: float
    cost_ratio: float  # mean cost / (T* log(1/delta))
    lower_bound: float  # T* d(delta, 1 - delta)
    compute_seconds: float


def summarize(records, instance: BanditInstance,
              props: OptimalProportions | None = None) -> BatchSummary:
    """Summary of one (instance, policy, delta) group.

    Censored and errored runs are counted but excluded from the cost, tau,
    fraction and error-rate statistics.
    """
    records = list(records)
    if not records:
        raise ValueError("cannot summarize an empty record set")
    groups = {(r.instance_id, r.policy, r.delta) for r in records}
    if len(groups) != 1:
        raise ValueError(f"records mix several (instance, policy, delta) groups: {sorted(groups)}")
    (iid, policy, delta), = groups
    props = props or compute_proportions(instance)
    errors = [r for r in records if r.error is not None]
    done = [r for r in records if r.error is None and not r.censored]
    n_censored = sum(1 for r in records if r.error is None and r.censored)
    K = instance.K
    if done:
        costs = np.array([r.total_cost for r in done])
        pulls = np.array([[n / r.tau for n in r.counts] for r in done]).mean(axis=0)
        cfrac = np.array([[c / r.total_cost for c in r.cost_totals] for r in done]).mean(axis=0)
        error_rate = float(np.mean([not r.correct for r in done]))
        mean_cost, median = float(costs.mean()), float(np.median(costs))
        q05, q95 = (float(q) for q in np.quantile(costs, [0.05, 0.95]))
        mean_tau = float(np.mean([r.tau for r in done]))
    else:
        nan = math.nan
        error_rate = mean_cost = median = q05 = q95 = mean_tau = nan
        pulls = cfrac = np.full(K, nan)
    return BatchSummary(
        instance_id=iid, policy=policy, delta=delta, n_runs=len(records), n_completed=len(done),
        n_censored=n_censored, n_errors=len(errors), error_rate=error_rate,
        mean_cost=mean_cost, median_cost=median, cost_q05=q05, cost_q95=q95, mean_tau=mean_tau,
        mean_pull_fractions=tuple(float(x) for x in pulls),
        mean_cost_fractions=tuple(float(x) for x in cfrac), t_star=props.t_star,
        cost_ratio=mean_cost / (props.t_star * math.log(1.0 / delta)),
        lower_bound=lower_bound_cost(instance, delta, props),
        compute_seconds=float(sum(r.compute_seconds for r in records)))


def pull_count_series(records) -> list[dict]:
    """Mean N_a(t) at each checkpoint over the runs still going at t."""
    by_t: dict[int, list] = {}
    for r in records:
        for t, fracs, _ in r.snapshots:
            by_t.setdefault(t, []).append([f * t for f in fracs])
    return [{"t": t, "survivors": len(rows), "mean_counts": tuple(np.mean(rows, axis=0).tolist())}
            for t, rows in sorted(by_t.items())]


# -- CSV ------------------------------------------------------------------------


def fmt(x: float) -> str:
    """17 significant digits: parses back to the identical double."""
    return format(float(x), ".17g")


def record_columns(K: int) -> list[str]:
    return (RECORD_FIXED_COLUMNS + [f"N_{a + 1}" for a in range(K)]
            + [f"cost_{a + 1}" for a in range(K)])


def write_records_csv(path, records, K: int) -> None:
    """One row per run; arms are 1-based in files (``decision``, ``N_a``, ``cost_a``)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(record_columns(K))
        for r in records:
            w.writerow([r.instance_id, r.policy, fmt(r.delta), r.seed, r.tau, fmt(r.total_cost),
                        r.decision + 1, int(r.correct), int(r.censored), *r.counts,
                        *(fmt(c) for c in r.cost_totals)])


def read_records_csv(path) -> list[TrajectoryRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        K = (len(header) - len(RECORD_FIXED_COLUMNS)) // 2
        if header != record_columns(K):
            raise ValueError(f"{path}: unexpected header {header}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            n0 = len(RECORD_FIXED_COLUMNS)
            out.append(TrajectoryRecord(
                instance_id=row[0], policy=row[1], delta=float(row[2]), seed=int(row[3]),
                tau=int(row[4]), total_cost=float(row[5]), decision=int(row[6]) - 1,
                correct=row[7] == "1", censored=row[8] == "1",
                counts=tuple(int(x) for x in row[n0:n0 + K]),
                cost_totals=tuple(float(x) for x in row[n0 + K:n0 + 2 * K])))
        return out


def write_snapshots_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SNAPSHOT_COLUMNS)
        for r in records:
            for t, pulls, costs in r.snapshots:
                for a, (p, c) in enumerate(zip(pulls, costs)):
                    w.writerow([r.seed, t, a + 1, fmt(p), fmt(c)])


def read_snapshots_csv(path) -> dict[int, list]:
    """seed -> [(t, pull fractions, cost fractions)], the shape stored on records."""
    rows: dict[tuple[int, int], dict[int, tuple[float, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != SNAPSHOT_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            key = (int(row["seed"]), int(row["t"]))
            rows.setdefault(key, {})[int(row["arm"])] = (float(row["pull_fraction"]),
                                                         float(row["cost_fraction"]))
    out: dict[int, list] = {}
    for (seed, t), arms in sorted(rows.items()):
        order = sorted(arms)
        out.setdefault(seed, []).append((t, tuple(arms[a][0] for a in order),
                                         tuple(arms[a][1] for a in order)))
    return out
