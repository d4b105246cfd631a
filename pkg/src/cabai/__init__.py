"""Cost-aware best arm identification: oracle, GLR stopping, tracking policies and a Monte-Carlo engine."""

__version__ = "0.1.0"

from .exp_family import (BanditInstance, CostModel, DomainError, RewardFamily, binary_kl,
                         kl_div)
from .oracle import (OptimalProportions, OracleError, asymptotic_cost, compute_proportions,
                     lower_bound_cost, solve_proportions)
from .glr import EmpiricalState, chernoff_stat, pairwise_glr, threshold
from .policies import PolicyConfig, make_policy
from .engine import (BatchSummary, TrajectoryRecord, replay, run_batch, run_trajectory,
                     summarize)

__all__ = [
    "BanditInstance", "CostModel", "DomainError", "RewardFamily", "binary_kl", "kl_div",
    "OptimalProportions", "OracleError", "asymptotic_cost", "compute_proportions",
    "lower_bound_cost", "solve_proportions",
    "EmpiricalState", "chernoff_stat", "pairwise_glr", "threshold",
    "PolicyConfig", "make_policy",
    "BatchSummary", "TrajectoryRecord", "replay", "run_batch", "run_trajectory", "summarize",
]
