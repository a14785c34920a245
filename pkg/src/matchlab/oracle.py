"""Brute-force ground truth for small markets.

Nothing here calls the deferred-acceptance code: stable matchings are found
by exhaustive search so that DA, truncation and the lazy process can be
checked against something that shares none of their logic.
"""
from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Hashable, Optional

from .market import AgentId, Matching, PreferenceProfile, rank_of

MAX_ORACLE_SIZE = 9


class OracleSizeError(ValueError):
    pass


@dataclass(frozen=True)
class StableSet:
    matchings: tuple[Matching, ...]

    @property
    def unmatched_signature(self) -> Optional[frozenset[AgentId]]:
        """Unmatched agents shared by every member, or None if members disagree."""
        sigs = {mu.unmatched() for mu in self.matchings}
        return next(iter(sigs)) if len(sigs) == 1 else None

    def __len__(self):
        return len(self.matchings)

    def __iter__(self):
        return iter(self.matchings)

    def __contains__(self, matching):
        return matching in self.matchings


def _guard(profile: PreferenceProfile) -> None:
    if max(profile.num_doctors, profile.num_hospitals) > MAX_ORACLE_SIZE:
        raise OracleSizeError(
            f"oracle enumeration limited to max(n, m) <= {MAX_ORACLE_SIZE}, "
            f"got {profile.num_doctors}x{profile.num_hospitals}"
        )


def _rank_dicts(lists):
    return [{x: i for i, x in enumerate(lst)} for lst in lists]


def _canonical(matchings) -> tuple[Matching, ...]:
    return tuple(sorted(set(matchings), key=lambda mu: [(-1 if h is None else h) for h in mu.doctor_match]))


def enumerate_stable_matchings(profile: PreferenceProfile) -> StableSet:
    """Every stable matching, by backtracking over doctors' assignments.

    Doctors are assigned one at a time to an acceptable hospital or to
    nobody. A partial assignment is abandoned as soon as a pair whose two
    partners are both already fixed is found to block; pairs involving a
    hospital left unmatched are checked once the assignment is complete.
    """
    _guard(profile)
    n, m = profile.num_doctors, profile.num_hospitals
    dlists, hlists = profile.doctor_lists, profile.hospital_lists
    drank, hrank = _rank_dicts(dlists), _rank_dicts(hlists)
    # options per doctor: mutually acceptable hospitals, then None
    options = [[h for h in dlists[d] if d in hrank[h]] + [None] for d in range(n)]

    def d_prefers(d, h, current):
        r = drank[d].get(h)
        if r is None:
            return False
        return current is None or r < drank[d][current]

    def h_prefers(h, d, current):
        r = hrank[h].get(d)
        if r is None:
            return False
        return current is None or r < hrank[h][current]

    dm: list[Optional[int]] = [None] * n
    hm: list[Optional[int]] = [None] * m
    found: list[Matching] = []

    def consistent(d, x):
        for h2 in range(m):
            if h2 != x and hm[h2] is not None and d_prefers(d, h2, x) and h_prefers(h2, d, hm[h2]):
                return False
        if x is not None:
            for d2 in range(d):
                if dm[d2] != x and d_prefers(d2, x, dm[d2]) and h_prefers(x, d2, d):
                    return False
        return True

    def extend(d):
        if d == n:
            for h in range(m):
                if hm[h] is None and any(d_prefers(dd, h, dm[dd]) and h_prefers(h, dd, None) for dd in range(n)):
                    return
            found.append(Matching(tuple(dm), tuple(hm)))
            return
        for x in options[d]:
            if x is not None and hm[x] is not None:
                continue
            if not consistent(d, x):
                continue
            dm[d] = x
            if x is not None:
                hm[x] = d
            extend(d + 1)
            dm[d] = None
            if x is not None:
                hm[x] = None

    extend(0)
    return StableSet(_canonical(found))


def all_matchings(profile: PreferenceProfile):
    """Every partial one-to-one matching of the market, ignoring preferences."""
    n, m = profile.num_doctors, profile.num_hospitals
    for choice in itertools.product(*[[None, *range(m)] for _ in range(n)]):
        used = [h for h in choice if h is not None]
        if len(used) != len(set(used)):
            continue
        hm: list[Optional[int]] = [None] * m
        for d, h in enumerate(choice):
            if h is not None:
                hm[h] = d
        yield Matching(tuple(choice), tuple(hm))


def enumerate_stable_matchings_exhaustive(profile: PreferenceProfile) -> StableSet:
    """Filter every partial matching through :func:`find_blocking_pairs`.

    Far slower than :func:`enumerate_stable_matchings`; used to cross-check
    it on tiny markets.
    """
    from .da import find_blocking_pairs

    if max(profile.num_doctors, profile.num_hospitals) > 5:
        raise OracleSizeError("exhaustive enumeration limited to max(n, m) <= 5")
    dlists, hlists = profile.doctor_lists, profile.hospital_lists

    def rational(mu):
        return all(
            h is None or (h in dlists[d] and d in hlists[h]) for d, h in enumerate(mu.doctor_match)
        )

    return StableSet(
        _canonical(mu for mu in all_matchings(profile) if rational(mu) and not find_blocking_pairs(profile, mu))
    )


def verify_rural_hospital(stable_set: StableSet) -> bool:
    if not stable_set.matchings:
        raise ValueError("empty stable set: complete preference lists always admit a stable matching")
    return stable_set.unmatched_signature is not None


def best_stable_rank(stable_set: StableSet, profile: PreferenceProfile, agent: AgentId) -> Optional[int]:
    """Best rank the agent gets in any stable matching; None if never matched."""
    if not stable_set.matchings:
        raise ValueError("empty stable set")
    ranks = [rank_of(profile, agent, mu) for mu in stable_set if mu.partner(agent) is not None]
    return min(ranks) if ranks else None


def worst_stable_rank(stable_set: StableSet, profile: PreferenceProfile, agent: AgentId) -> Optional[int]:
    ranks = [rank_of(profile, agent, mu) for mu in stable_set if mu.partner(agent) is not None]
    return max(ranks) if ranks else None


def empirical_distribution(sampler: Callable[[int], Hashable], num_samples: int) -> Counter:
    return Counter(sampler(i) for i in range(num_samples))


def total_variation(a: Counter, b: Counter) -> float:
    na, nb = sum(a.values()), sum(b.values())
    if na == 0 or nb == 0:
        raise ValueError("cannot compare empty samples")
    return 0.5 * sum(abs(a[k] / na - b[k] / nb) for k in set(a) | set(b))


def matching_distribution_distance(
    sampler_a: Callable[[int], Hashable],
    sampler_b: Callable[[int], Hashable],
    num_samples: int,
) -> float:
    """Total-variation distance between two empirical outcome distributions.

    A sampler maps a sample index to a hashable outcome (typically a
    matching's ``doctor_match`` tuple); it should seed itself from the index.
    """
    return total_variation(
        empirical_distribution(sampler_a, num_samples),
        empirical_distribution(sampler_b, num_samples),
    )

