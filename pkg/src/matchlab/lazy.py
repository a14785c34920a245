"""Doctor-proposing DA driven by the principle of deferred decisions.

No preference lists are drawn up front. Each proposal goes to a uniformly
random hospital; a hospital that has already heard from ``k`` distinct
doctors accepts a new one with probability ``1/(1+k)`` and ignores repeat
proposals. The "rejector" variant makes one designated hospital turn down
everything, which is the process used to bound how many proposals that
hospital can ever see.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import NamedTuple, Optional

from .market import MASK64, Market, Matching


@dataclass(frozen=True)
class LazyTrace:
    """Counts from one run of the lazy process.

    ``phase_lengths[i]`` counts the proposals up to and including the one
    that reaches the (i+1)-th distinct hospital (excluding the target in the
    rejector variant); ``target_hits_per_phase[i]`` is how many of those went
    to the target. ``trailing_proposals`` is non-zero only when doctors run
    out of hospitals before all of them are matched (more doctors than
    hospitals).
    """

    total_proposals: int
    filtered_proposals: int
    proposals_to_target: int
    phase_lengths: tuple[int, ...]
    target_hits_per_phase: tuple[int, ...]
    trailing_proposals: int
    matching: Matching
    target: Optional[int] = None
    distinct_per_doctor: tuple[int, ...] = ()

    def doctor_ranks(self) -> tuple[int, ...]:
        """Rank each doctor gives their final match, under the revealed order.

        A matched doctor's partner is the last distinct hospital they proposed
        to, so the rank is the number of distinct hospitals they tried.
        """
        m = len(self.matching.hospital_match)
        return tuple(
            k if h is not None else m + 1
            for k, h in zip(self.distinct_per_doctor, self.matching.doctor_match)
        )


class CoupledRun(NamedTuple):
    lazy_total: int
    filtered_total: int
    matching: Matching


def _simulate(market: Market, seed: int, target: Optional[int], reject_target: bool) -> LazyTrace:
    n, m = market.num_doctors, market.num_hospitals
    rng = random.Random(seed & MASK64)
    getrandbits = rng.getrandbits
    bits = m.bit_length()
    uniform = rng.random

    seen: list[set] = [set() for _ in range(m)]  # distinct proposers per hospital
    held = [-1] * m
    partner = [-1] * n
    tried = [0] * n  # distinct hospitals each doctor has proposed to
    free = list(range(n))

    total = 0
    filtered = 0
    to_target = 0
    phase_len = 0
    phase_hits = 0
    phases: list[int] = []
    hits: list[int] = []

    while free:
        d = free[-1]
        if tried[d] == m:
            free.pop()
            continue
        h = getrandbits(bits)  # rejection sampling keeps the draw exactly uniform
        while h >= m:
            h = getrandbits(bits)
        total += 1
        phase_len += 1
        seen_h = seen[h]
        if h == target:
            to_target += 1
            phase_hits += 1
            if reject_target:
                if d not in seen_h:
                    seen_h.add(d)
                    tried[d] += 1
                    filtered += 1
                continue
        if d in seen_h:
            continue
        k = len(seen_h)
        seen_h.add(d)
        tried[d] += 1
        filtered += 1
        if k == 0:
            phases.append(phase_len)
            hits.append(phase_hits)
            phase_len = phase_hits = 0
        elif uniform() * (k + 1) >= 1.0:
            continue
        free.pop()
        cur = held[h]
        if cur >= 0:
            partner[cur] = -1
            free.append(cur)
        held[h] = d
        partner[d] = h

    if reject_target:
        # the target cannot strand a doctor: n other hospitals suffice for n doctors
        assert all(p >= 0 for p in partner) or m - 1 < n, "rejector process stalled"

    matching = Matching(
        tuple(None if p < 0 else p for p in partner),
        tuple(None if d < 0 else d for d in held),
    )
    return LazyTrace(
        total_proposals=total,
        filtered_proposals=filtered,
        proposals_to_target=to_target,
        phase_lengths=tuple(phases),
        target_hits_per_phase=tuple(hits),
        trailing_proposals=phase_len,
        matching=matching,
        target=target,
        distinct_per_doctor=tuple(tried),
    )


def run_dpda_prime(market: Market, seed: int, target: Optional[int] = None) -> LazyTrace:
    """One sample path of the lazy doctor-proposing process.

    ``target`` only designates a hospital whose incoming proposals are
    counted; it behaves like every other hospital.
    """
    if target is not None and not 0 <= target < market.num_hospitals:
        raise IndexError(f"target hospital {target} out of range")
    return _simulate(market, seed, target, reject_target=False)


def run_dpda_prime_rejector(market: Market, target: int, seed: int) -> LazyTrace:
    """Lazy process in which ``target`` rejects every proposal it receives.

    Needs exactly one more hospital than doctors; the run ends once every
    doctor holds a hospital other than the target.
    """
    if market.num_hospitals != market.num_doctors + 1:
        raise ValueError(f"rejector process needs m = n + 1, got {market}")
    if not 0 <= target < market.num_hospitals:
        raise IndexError(f"target hospital {target} out of range")
    return _simulate(market, seed, target, reject_target=True)


def coupled_run(market: Market, seed: int) -> CoupledRun:
    """Lazy total alongside the total with repeat proposals filtered out.

    Repeats never change any state, so both processes share one matching,
    and the filtered count is distributed as the proposal count of
    deferred acceptance on uniformly random lists.
    """
    trace = _simulate(market, seed, None, reject_target=False)
    return CoupledRun(trace.total_proposals, trace.filtered_proposals, trace.matching)
