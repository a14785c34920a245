"""Oracle-backed invariant sweep used by ``matchlab verify``."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .da import STACK, OrderPolicy, find_blocking_pairs, run_dpda, run_hpda
from .experiments import trial_seed
from .lazy import run_dpda_prime
from .market import AgentId, Market, Side, generate_uniform_profile, rank_of
from .oracle import (
    MAX_ORACLE_SIZE,
    OracleSizeError,
    best_stable_rank,
    enumerate_stable_matchings,
    matching_distribution_distance,
    verify_rural_hospital,
    worst_stable_rank,
)
from .truncation import hospital_optimal_rank_via_truncation

TV_SAMPLES = 20_000
TV_LIMIT = 0.02


@dataclass(frozen=True)
class Failure:
    check: str
    market: Market
    seed: int
    detail: str

    def __str__(self):
        return (
            f"FAILED {self.check} on {self.market.num_doctors}x{self.market.num_hospitals} "
            f"(reproduce with generate_uniform_profile(Market({self.market.num_doctors}, "
            f"{self.market.num_hospitals}), seed={self.seed})): {self.detail}"
        )


def check_instance(market: Market, seed: int, dpda=None, hpda=None) -> Optional[Failure]:
    """Run every oracle-backed invariant on one random profile; first failure wins."""
    dpda = dpda or run_dpda
    hpda = hpda or run_hpda
    profile = generate_uniform_profile(market, seed)

    def fail(check, detail):
        return Failure(check, market, seed, detail)

    mu_d = dpda(profile).matching
    mu_h = hpda(profile).matching
    for name, mu in (("dpda", mu_d), ("hpda", mu_h)):
        blocking = find_blocking_pairs(profile, mu)
        if blocking:
            return fail("stability", f"{name} matching {mu.pairs} blocked by {blocking[0]}")

    for order in (STACK, OrderPolicy.random(seed)):
        other = dpda(profile, order).matching
        if other != mu_d:
            return fail("order-invariance", f"{order} gave {other.pairs}, queue gave {mu_d.pairs}")

    stable = enumerate_stable_matchings(profile)
    if mu_d not in stable or mu_h not in stable:
        return fail("lattice-endpoints", "DA output missing from the enumerated stable set")
    if not verify_rural_hospital(stable):
        return fail("rural-hospital", "stable matchings disagree on who is unmatched")
    if mu_d.unmatched() != stable.unmatched_signature:
        return fail("rural-hospital", "dpda leaves a different set unmatched")

    for d in range(market.num_doctors):
        agent = AgentId(Side.DOCTOR, d)
        if rank_of(profile, agent, mu_d) != min(rank_of(profile, agent, mu) for mu in stable):
            return fail("doctor-optimality", f"doctor {d} has a better stable partner than under dpda")
    for h in range(market.num_hospitals):
        agent = AgentId(Side.HOSPITAL, h)
        if rank_of(profile, agent, mu_h) != min(rank_of(profile, agent, mu) for mu in stable):
            return fail("hospital-optimality", f"hospital {h} has a better stable partner than under hpda")
        best = best_stable_rank(stable, profile, agent)
        result = hospital_optimal_rank_via_truncation(profile, h)
        if result.optimal_rank != best:
            return fail("truncation-lemma", f"hospital {h}: truncation says {result.optimal_rank}, oracle says {best}")
        worst = worst_stable_rank(stable, profile, agent)
        if worst is not None and rank_of(profile, agent, mu_d) != worst:
            return fail("hospital-pessimality", f"hospital {h} is not at its worst stable partner under dpda")
    return None


def distribution_check(seed: int, n: int = 2, samples: int = TV_SAMPLES, dpda=None) -> Optional[Failure]:
    """Lazy process and DA on random lists should give the same matching distribution."""
    dpda = dpda or run_dpda
    market = Market(n, n)

    def lazy(i):
        return run_dpda_prime(market, trial_seed(seed, i)).matching.doctor_match

    def eager(i):
        return dpda(generate_uniform_profile(market, trial_seed(seed + 1, i))).matching.doctor_match

    tv = matching_distribution_distance(lazy, eager, samples)
    if tv > TV_LIMIT:
        return Failure("distribution-equivalence", market, seed, f"TV distance {tv:.4f} > {TV_LIMIT}")
    return None


def verify_suite(max_n: int, trials: int, seed: int, dpda=None, hpda=None, progress=None) -> Optional[Failure]:
    """Sweep sizes 1..max_n (balanced and one-extra-hospital) with ``trials`` profiles each."""
    if max_n > MAX_ORACLE_SIZE:
        raise OracleSizeError(f"--max-n is limited to {MAX_ORACLE_SIZE}, got {max_n}")
    if max_n < 1 or trials < 1:
        raise ValueError("max-n and trials must be >= 1")
    shapes = [Market(n, n) for n in range(1, max_n + 1)]
    shapes += [Market(n, n + 1) for n in range(1, max_n)]
    counter = 0
    for market in shapes:
        for _ in range(trials):
            failure = check_instance(market, trial_seed(seed, counter), dpda, hpda)
            counter += 1
            if failure:
                return failure
        if progress:
            progress(market)
    return distribution_check(seed, dpda=dpda)
