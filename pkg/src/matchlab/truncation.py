"""A hospital's best stable rank, found by truncating its list.

A hospital has a stable partner among its top ``k`` doctors exactly when it
is still matched by doctor-proposing DA after cutting its list to those
``k``. The smallest such ``k`` is its rank in the hospital-optimal matching.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from .da import run_dpda
from .market import PreferenceProfile, truncate_hospital_list


class Strategy(str, enum.Enum):
    LINEAR = "linear"
    BINARY = "binary"


@dataclass(frozen=True)
class TruncationResult:
    hospital: int
    optimal_rank: Optional[int]  # None: unmatched in every stable matching
    probes: tuple[tuple[int, bool], ...]  # (keep, matched), sorted by keep

    @property
    def unmatchable(self) -> bool:
        return self.optimal_rank is None

    def to_dict(self) -> dict:
        return {
            "hospital": self.hospital,
            "optimal_rank": "unmatchable" if self.optimal_rank is None else self.optimal_rank,
            "probes": [{"keep": k, "matched": m} for k, m in self.probes],
        }


def matched_under_truncation(profile: PreferenceProfile, hospital: int, keep: int) -> bool:
    truncated = truncate_hospital_list(profile, hospital, keep)
    return run_dpda(truncated).matching.hospital_match[hospital] is not None


def hospital_optimal_rank_via_truncation(
    profile: PreferenceProfile, hospital: int, strategy: Strategy = Strategy.BINARY
) -> TruncationResult:
    """Smallest keep-length at which ``hospital`` stays matched.

    ``LINEAR`` probes every k in 1..L so the whole monotone sequence is
    visible; ``BINARY`` needs O(log L) DA runs.
    """
    if not 0 <= hospital < profile.num_hospitals:
        raise IndexError(f"hospital {hospital} out of range")
    strategy = Strategy(strategy)
    length = len(profile.hospital_lists[hospital])
    probes: dict[int, bool] = {}

    def probe(k: int) -> bool:
        if k not in probes:
            probes[k] = matched_under_truncation(profile, hospital, k)
        return probes[k]

    best: Optional[int] = None
    if strategy is Strategy.LINEAR:
        for k in range(1, length + 1):
            if probe(k) and best is None:
                best = k
    elif length > 0 and probe(length):
        lo, hi = 1, length  # invariant: matched at hi
        while lo < hi:
            mid = (lo + hi) // 2
            if probe(mid):
                hi = mid
            else:
                lo = mid + 1
        best = hi

    return TruncationResult(hospital, best, tuple(sorted(probes.items())))
