"""Acceptance criteria, one test each.

Every test prints a single ``CRITERION <k> PASS|FAIL`` line (shown even when
output capture is on) and then asserts. Sizes and tolerances live in
``matchlab.thresholds``.
"""
import math
import time

import pytest

from matchlab import thresholds as T
from matchlab.da import OrderPolicy, STACK, run_dpda, run_hpda
from matchlab.experiments import (
    ExperimentConfig,
    harmonic_number,
    run_balanced_experiment,
    run_rejector_tail_experiment,
    run_unbalanced_experiment,
    trial_seed,
)
from matchlab.lazy import coupled_run, run_dpda_prime
from matchlab.market import AgentId, Market, Side, generate_uniform_profile, rank_of, side_ranks
from matchlab.oracle import best_stable_rank, enumerate_stable_matchings, matching_distribution_distance, verify_rural_hospital
from matchlab.truncation import hospital_optimal_rank_via_truncation

SEED = 12345


@pytest.fixture
def report(capsys):
    def _report(number, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {number:>2} {'PASS' if ok else 'FAIL'}: {detail}", flush=True)
        assert ok, detail

    return _report


@pytest.fixture(scope="module")
def balanced():
    config = ExperimentConfig.for_kind("balanced", T.BALANCED_N, T.BALANCED_TRIALS, SEED)
    return run_balanced_experiment(config)


@pytest.fixture(scope="module")
def rejector():
    config = ExperimentConfig.for_kind("rejector-tail", T.REJECTOR_N, T.REJECTOR_TRIALS, SEED)
    start = time.perf_counter()
    result = run_rejector_tail_experiment(config)
    return result, time.perf_counter() - start


@pytest.fixture(scope="module")
def oracle_sweep():
    """Per-instance verdicts for criteria 7-9 over every oracle size."""
    shapes = [Market(n, n) for n in T.ORACLE_BALANCED_SIZES]
    shapes += [Market(n, n + 1) for n in T.ORACLE_UNBALANCED_SIZES]
    truncation_mismatches, rural_violations, optimality_violations = [], [], []
    instances = 0
    start = time.perf_counter()
    for s, market in enumerate(shapes):
        for i in range(T.ORACLE_INSTANCES):
            seed = trial_seed(SEED + s, i)
            profile = generate_uniform_profile(market, seed)
            stable = enumerate_stable_matchings(profile)
            instances += 1
            for h in range(market.num_hospitals):
                got = hospital_optimal_rank_via_truncation(profile, h).optimal_rank
                want = best_stable_rank(stable, profile, AgentId.hospital(h))
                if got != want:
                    truncation_mismatches.append((market, seed, h, got, want))
            mu_d = run_dpda(profile).matching
            if not verify_rural_hospital(stable) or mu_d.unmatched() != stable.unmatched_signature:
                rural_violations.append((market, seed))
            for d in range(market.num_doctors):
                agent = AgentId.doctor(d)
                if rank_of(profile, agent, mu_d) != min(rank_of(profile, agent, mu) for mu in stable):
                    optimality_violations.append((market, seed, d))
    elapsed = time.perf_counter() - start
    return instances, elapsed, truncation_mismatches, rural_violations, optimality_violations


def test_criterion_01_balanced_proposal_count(balanced, report):
    result = balanced
    target = T.BALANCED_N * harmonic_number(T.BALANCED_N)
    market = Market(T.BALANCED_N, T.BALANCED_N)
    start = time.perf_counter()
    totals = [run_dpda_prime(market, trial_seed(SEED, t)).total_proposals for t in range(T.BALANCED_TRIALS)]
    elapsed = time.perf_counter() - start
    mean = sum(totals) / len(totals)
    experiment_mean = result.aggregates["lazy_total_proposals"].mean
    ok = (
        abs(mean - target) <= T.LAZY_MEAN_REL_TOL * target
        and abs(experiment_mean - target) <= T.LAZY_MEAN_REL_TOL * target
        and elapsed < T.BALANCED_RUNTIME_S
    )
    report(1, ok, f"mean Y = {mean:.1f} (experiment column {experiment_mean:.1f}) vs n*H_n = {target:.1f} "
                  f"(tol {T.LAZY_MEAN_REL_TOL:.0%}); {T.BALANCED_TRIALS} lazy runs in {elapsed:.2f}s")


def test_criterion_02_balanced_doctor_rank(balanced, report):
    result = balanced
    agg = result.aggregates["mean_doctor_rank"]
    bound = harmonic_number(T.BALANCED_N) + T.RANK_SE_SLACK * agg.se
    # time the DPDA trials on their own; the experiment also makes a lazy run per trial
    market = Market(T.BALANCED_N, T.BALANCED_N)
    start = time.perf_counter()
    means = []
    for t in range(T.BALANCED_TRIALS):
        profile = generate_uniform_profile(market, trial_seed(SEED, t))
        means.append(float(side_ranks(profile, run_dpda(profile).matching, Side.DOCTOR).mean()))
    elapsed = time.perf_counter() - start
    ok = agg.mean <= bound and elapsed < T.BALANCED_RUNTIME_S and means == result.column("mean_doctor_rank")
    report(2, ok, f"mean doctor rank {agg.mean:.3f} (se {agg.se:.3f}) <= H_n + 3se = {bound:.3f}; "
                  f"{T.BALANCED_TRIALS} DPDA trials in {elapsed:.2f}s")


def test_criterion_03_balanced_hospital_rank(balanced, report):
    result = balanced
    agg = result.aggregates["mean_hospital_rank"]
    floor = T.BALANCED_N / (1 + harmonic_number(T.BALANCED_N)) - T.RANK_SE_SLACK * agg.se
    report(3, agg.mean >= floor, f"mean hospital rank {agg.mean:.2f} (se {agg.se:.2f}) >= n/(1+H_n) - 3se = {floor:.2f}")


def test_criterion_04_rejector_mean(rejector, report):
    result, elapsed = rejector
    target = harmonic_number(T.REJECTOR_N)
    mean = result.aggregates["ybar"].mean
    ok = abs(mean - target) <= T.REJECTOR_MEAN_REL_TOL * target and elapsed < T.REJECTOR_RUNTIME_S
    report(4, ok, f"mean Y-bar {mean:.3f} vs H_n = {target:.3f} (tol {T.REJECTOR_MEAN_REL_TOL:.0%}); "
                  f"{T.REJECTOR_TRIALS} trials in {elapsed:.2f}s")


def test_criterion_05_tail_probability(rejector, report):
    result, _ = rejector
    threshold = 3 * math.log(T.REJECTOR_N)
    ys = result.column("ybar")
    p = sum(y <= threshold for y in ys) / len(ys)
    report(5, p >= T.TAIL_PROBABILITY, f"P[Y-bar <= 3 ln n = {threshold:.2f}] = {p:.4f} >= {T.TAIL_PROBABILITY}")


def test_criterion_06_unbalanced_long_side_rank(report):
    config = ExperimentConfig.for_kind("unbalanced", T.UNBALANCED_N, T.UNBALANCED_TRIALS, SEED)
    agg = run_unbalanced_experiment(config).aggregates["hstar_rank_hpda"]
    bound = T.long_side_bound(T.UNBALANCED_N)
    report(6, agg.mean >= bound, f"mean HPDA rank of h* {agg.mean:.2f} (se {agg.se:.2f}) >= n/(6 ln n) = {bound:.2f}")


def test_criterion_07_truncation_lemma(oracle_sweep, report):
    instances, elapsed, mismatches, _, _ = oracle_sweep
    ok = not mismatches and elapsed < T.ORACLE_RUNTIME_S
    report(7, ok, f"{len(mismatches)} truncation/oracle mismatches over {instances} instances "
                  f"(every hospital checked); sweep took {elapsed:.2f}s (includes criteria 8 and 9)")


def test_criterion_08_rural_hospital(oracle_sweep, report):
    instances, _, _, violations, _ = oracle_sweep
    report(8, not violations, f"{len(violations)} rural-hospital violations over {instances} instances")


def test_criterion_09_doctor_optimality(oracle_sweep, report):
    instances, _, _, _, violations = oracle_sweep
    report(9, not violations, f"{len(violations)} doctors with a better stable partner than DPDA over {instances} instances")


def test_criterion_10_coupling_dominance(report):
    market = Market(T.COUPLING_N, T.COUPLING_N)
    bad = [s for s in range(T.COUPLING_RUNS) if (r := coupled_run(market, trial_seed(SEED, s))).filtered_total > r.lazy_total]
    report(10, not bad, f"{len(bad)} of {T.COUPLING_RUNS} coupled paths with filtered > lazy")


def test_criterion_11_distribution_equivalence(report):
    distances = {}
    for n in T.TV_SIZES:
        market = Market(n, n)
        distances[n] = matching_distribution_distance(
            lambda i: run_dpda_prime(market, trial_seed(SEED, i)).matching.doctor_match,
            lambda i: run_dpda(generate_uniform_profile(market, trial_seed(SEED + 1, i))).matching.doctor_match,
            T.TV_SAMPLES,
        )
    ok = all(tv <= T.TV_LIMIT for tv in distances.values())
    detail = ", ".join(f"n={n}: TV {tv:.4f}" for n, tv in distances.items())
    report(11, ok, f"{detail} (limit {T.TV_LIMIT}, {T.TV_SAMPLES} samples per process)")


def test_criterion_12_order_invariance(report):
    differing = []
    for i in range(T.ORDER_PROFILES):
        n = 1 + i % T.ORDER_MAX_N
        profile = generate_uniform_profile(Market(n, n + (i // T.ORDER_MAX_N) % 2), trial_seed(SEED, i))
        for solver in (run_dpda, run_hpda):
            outcomes = {solver(profile, order).matching for order in (OrderPolicy("queue"), STACK, OrderPolicy.random(i))}
            if len(outcomes) != 1:
                differing.append((i, solver.__name__))
    report(12, not differing, f"{len(differing)} of {T.ORDER_PROFILES} profiles where queue/stack/random orders disagree")
