"""Deferred acceptance, blocking pairs and proposal traces."""
from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .market import MASK64, Matching, PreferenceProfile, Side


class OrderPolicy(NamedTuple):
    """Which free proposer moves next: ``queue``, ``stack`` or seeded ``random``."""

    kind: str = "queue"
    seed: Optional[int] = None

    @classmethod
    def random(cls, seed: int) -> "OrderPolicy":
        return cls("random", seed)

    @classmethod
    def parse(cls, text: str) -> "OrderPolicy":
        text = text.strip().lower()
        if text in ("queue", "stack"):
            return cls(text)
        if text.startswith("random:"):
            return cls.random(int(text.split(":", 1)[1]))
        raise ValueError(f"unknown order policy {text!r}; expected queue, stack or random:SEED")

    def __str__(self):
        return self.kind if self.seed is None else f"{self.kind}:{self.seed}"


QUEUE = OrderPolicy("queue")
STACK = OrderPolicy("stack")


# (proposer, receiver, accepted)
Proposal = tuple[int, int, bool]


@dataclass(frozen=True)
class DaTrace:
    matching: Matching
    proposing_side: Side
    proposals: tuple[Proposal, ...]
    proposals_per_proposer: tuple[int, ...]

    @property
    def total_proposals(self) -> int:
        return len(self.proposals)

    def to_dict(self) -> dict:
        return {
            "proposing_side": self.proposing_side.value,
            "total_proposals": self.total_proposals,
            "proposals_per_proposer": list(self.proposals_per_proposer),
            "proposals": [list(p) for p in self.proposals],
        }


class BlockingPair(NamedTuple):
    doctor: int
    hospital: int


def _pool(members: list, policy: OrderPolicy):
    """(items, take, put) for the free-proposer pool under ``policy``."""
    if policy.kind == "queue":
        items = deque(members)
        return items, items.popleft, items.append
    if policy.kind == "stack":
        return members, members.pop, members.append
    if policy.kind == "random":
        rng = random.Random((policy.seed or 0) & MASK64)

        def take():
            i = rng.randrange(len(members))
            members[i], members[-1] = members[-1], members[i]
            return members.pop()

        return members, take, members.append
    raise ValueError(f"unknown order policy {policy!r}")


def _deferred_acceptance(profile: PreferenceProfile, side: Side, policy: OrderPolicy):
    prefs, lengths, recv_ranks, recv_lengths = profile.arrays(side)
    n_prop = prefs.shape[0]
    n_recv = recv_ranks.shape[0]
    # row views keep per-proposal cost O(1) without converting whole tables
    pref_rows = list(prefs) if n_prop * n_recv > 4096 else prefs.tolist()
    rank_rows = list(recv_ranks) if n_prop * n_recv > 4096 else recv_ranks.tolist()
    lengths = lengths.tolist()
    recv_lengths = recv_lengths.tolist()

    next_pos = [0] * n_prop
    held = [-1] * n_recv
    proposals: list[Proposal] = []
    record = proposals.append
    pool, take, put = _pool([p for p in range(n_prop) if lengths[p] > 0], policy)

    while pool:
        p = take()
        r = int(pref_rows[p][next_pos[p]])
        next_pos[p] += 1
        ranks = rank_rows[r]
        rank_p = ranks[p]
        cur = held[r]
        if rank_p < recv_lengths[r] and (cur < 0 or rank_p < ranks[cur]):
            held[r] = p
            record((p, r, True))
            if cur >= 0 and next_pos[cur] < lengths[cur]:
                put(cur)
        else:
            record((p, r, False))
            if next_pos[p] < lengths[p]:
                put(p)

    recv_match = tuple(None if x < 0 else x for x in held)
    prop_match: list[Optional[int]] = [None] * n_prop
    for r, p in enumerate(recv_match):
        if p is not None:
            prop_match[p] = r
    return tuple(prop_match), recv_match, tuple(proposals), tuple(next_pos)


def run_dpda(profile: PreferenceProfile, order: OrderPolicy = QUEUE) -> DaTrace:
    """Doctor-proposing deferred acceptance; returns the doctor-optimal stable matching.

    A doctor who has been displaced resumes from the next hospital on their
    list. A hospital rejects any doctor missing from its (possibly truncated)
    list.
    """
    dm, hm, proposals, counts = _deferred_acceptance(profile, Side.DOCTOR, order)
    return DaTrace(Matching(dm, hm), Side.DOCTOR, proposals, counts)


def run_hpda(profile: PreferenceProfile, order: OrderPolicy = QUEUE) -> DaTrace:
    """Hospital-proposing deferred acceptance (hospital-optimal stable matching).

    Proposals in the trace are ``(hospital, doctor, accepted)``.
    """
    hm, dm, proposals, counts = _deferred_acceptance(profile, Side.HOSPITAL, order)
    return DaTrace(Matching(dm, hm), Side.HOSPITAL, proposals, counts)


def find_blocking_pairs(profile: PreferenceProfile, matching: Matching) -> list[BlockingPair]:
    """Every pair (d, h) that would both rather be together than with their partners.

    Being unmatched ranks just below the last acceptable partner, so an
    unmatched agent blocks with anyone acceptable who also wants them.
    """
    if matching.market != profile.market:
        raise ValueError("matching dimensions do not match the profile")
    drank = profile.doctor_ranks
    hrank = profile.hospital_ranks
    dlen = profile._dlen
    hlen = profile._hlen
    dm = np.array([-1 if h is None else h for h in matching.doctor_match], dtype=np.int64)
    hm = np.array([-1 if d is None else d for d in matching.hospital_match], dtype=np.int64)

    d_idx = np.arange(profile.num_doctors)
    h_idx = np.arange(profile.num_hospitals)
    d_cur = np.where(dm >= 0, drank[d_idx, np.maximum(dm, 0)], dlen)
    h_cur = np.where(hm >= 0, hrank[h_idx, np.maximum(hm, 0)], hlen)
    d_cur = np.minimum(d_cur, dlen)
    h_cur = np.minimum(h_cur, hlen)

    d_wants = drank < d_cur[:, None]  # (n, m)
    h_wants = (hrank < h_cur[:, None]).T  # (n, m)
    blocks = d_wants & h_wants
    return [BlockingPair(int(d), int(h)) for d, h in np.argwhere(blocks)]


def is_stable(profile: PreferenceProfile, matching: Matching) -> bool:
    return not find_blocking_pairs(profile, matching)
