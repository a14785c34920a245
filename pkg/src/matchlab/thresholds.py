"""Sizes and tolerances for the acceptance checks, kept in one place."""
import math

# balanced market, lazy and eager runs
BALANCED_N = 1000
BALANCED_TRIALS = 200
LAZY_MEAN_REL_TOL = 0.05  # mean Y within 5% of n * H_n
RANK_SE_SLACK = 3.0  # standard errors allowed on the doctor/hospital rank bounds
BALANCED_RUNTIME_S = 10.0

# rejector process
REJECTOR_N = 1000
REJECTOR_TRIALS = 2000
REJECTOR_MEAN_REL_TOL = 0.05  # mean Y-bar within 5% of H_n
TAIL_PROBABILITY = 0.5  # P[Y-bar <= 3 ln n] must reach this
REJECTOR_RUNTIME_S = 60.0

# unbalanced market, long-side rank
UNBALANCED_N = 500
UNBALANCED_TRIALS = 200


def long_side_bound(n: int) -> float:
    return n / (6 * math.log(n))


# oracle sweep
ORACLE_INSTANCES = 1000
ORACLE_BALANCED_SIZES = range(2, 8)
ORACLE_UNBALANCED_SIZES = range(1, 8)  # (n, n + 1)
ORACLE_RUNTIME_S = 60.0

# lazy process coupling and distribution
COUPLING_N = 10
COUPLING_RUNS = 10_000
TV_SIZES = (2, 3)
TV_SAMPLES = 100_000
TV_LIMIT = 0.02

# execution-order invariance
ORDER_PROFILES = 200
ORDER_MAX_N = 30
