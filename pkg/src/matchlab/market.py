"""Markets, preference profiles, matchings and ranks.

Preference lists are stored as padded integer arrays plus a per-agent list
length, so truncating a hospital's list only touches one length entry and
the inverse-rank tables can be shared between a profile and its truncations.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

MASK64 = (1 << 64) - 1


class Side(str, enum.Enum):
    DOCTOR = "doctor"
    HOSPITAL = "hospital"

    @property
    def other(self) -> "Side":
        return Side.HOSPITAL if self is Side.DOCTOR else Side.DOCTOR


@dataclass(frozen=True, order=True)
class AgentId:
    side: Side
    index: int

    def __post_init__(self):
        if self.index < 0:
            raise ValueError(f"agent index must be >= 0, got {self.index}")

    def __str__(self):
        return f"{self.side.value[0]}{self.index}"

    @classmethod
    def doctor(cls, index: int) -> "AgentId":
        return cls(Side.DOCTOR, index)

    @classmethod
    def hospital(cls, index: int) -> "AgentId":
        return cls(Side.HOSPITAL, index)


@dataclass(frozen=True)
class Market:
    num_doctors: int
    num_hospitals: int

    def __post_init__(self):
        if self.num_doctors < 1 or self.num_hospitals < 1:
            raise ValueError(
                f"market needs at least one agent per side, got "
                f"{self.num_doctors}x{self.num_hospitals}"
            )

    @property
    def is_balanced(self) -> bool:
        return self.num_doctors == self.num_hospitals

    @property
    def is_unbalanced_by_one(self) -> bool:
        return self.num_hospitals == self.num_doctors + 1

    def size(self, side: Side) -> int:
        return self.num_doctors if side is Side.DOCTOR else self.num_hospitals

    def transposed(self) -> "Market":
        return Market(self.num_hospitals, self.num_doctors)

    def check_agent(self, agent: AgentId) -> None:
        if agent.index >= self.size(agent.side):
            raise IndexError(f"{agent} out of range for {self}")


def _pad_lists(lists: Sequence[Sequence[int]], width: int, owner: str):
    rows = len(lists)
    prefs = np.full((rows, width), -1, dtype=np.int64)
    lengths = np.zeros(rows, dtype=np.int64)
    for i, lst in enumerate(lists):
        lst = [int(x) for x in lst]
        if len(set(lst)) != len(lst):
            raise ValueError(f"{owner} {i}: duplicate entries in {lst}")
        if any(x < 0 or x >= width for x in lst):
            raise ValueError(f"{owner} {i}: entry out of range 0..{width - 1} in {lst}")
        prefs[i, : len(lst)] = lst
        lengths[i] = len(lst)
    return prefs, lengths


def _inverse_ranks(prefs: np.ndarray, width: int) -> np.ndarray:
    """Position of each partner in each padded row; ``width`` if absent."""
    rows = prefs.shape[0]
    if (prefs >= 0).all():
        ranks = np.empty((rows, width), dtype=np.int64)
        np.put_along_axis(ranks, prefs, np.broadcast_to(np.arange(width), prefs.shape), axis=1)
    else:
        ranks = np.full((rows, width), width, dtype=np.int64)
        r, c = np.nonzero(prefs >= 0)
        ranks[r, prefs[r, c]] = c
    return _freeze(ranks)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class PreferenceProfile:
    """Strict preference lists for both sides of a market.

    A list is every partner the agent finds acceptable, most preferred first.
    Instances are immutable; :func:`truncate_hospital_list` returns a copy.
    """

    def __init__(
        self,
        market: Market,
        doctor_prefs,
        doctor_lengths,
        hospital_prefs,
        hospital_lengths,
        *,
        hospital_ranks=None,
    ):
        self.market = market
        n, m = market.num_doctors, market.num_hospitals
        self._dprefs = _freeze(np.asarray(doctor_prefs, dtype=np.int64))
        self._dlen = _freeze(np.asarray(doctor_lengths, dtype=np.int64))
        self._hlen = _freeze(np.asarray(hospital_lengths, dtype=np.int64))
        if hospital_prefs is not None:
            self.__dict__["_hprefs"] = _freeze(np.asarray(hospital_prefs, dtype=np.int64))
        elif hospital_ranks is None:
            raise ValueError("need hospital preferences or hospital rank table")
        if hospital_ranks is not None:
            self.__dict__["hospital_ranks"] = _freeze(np.asarray(hospital_ranks, dtype=np.int64))
        if self._dprefs.shape != (n, m) or self.hospital_ranks.shape != (m, n):
            raise ValueError("preference arrays do not match market dimensions")

    @cached_property
    def _hprefs(self) -> np.ndarray:
        # only reached for generated profiles, whose lists are complete
        ranks = self.hospital_ranks
        prefs = np.empty_like(ranks)
        np.put_along_axis(prefs, ranks, np.broadcast_to(np.arange(ranks.shape[1]), ranks.shape), axis=1)
        return _freeze(prefs)

    @classmethod
    def from_lists(
        cls,
        doctor_lists: Sequence[Sequence[int]],
        hospital_lists: Sequence[Sequence[int]],
        market: Optional[Market] = None,
    ) -> "PreferenceProfile":
        if market is None:
            market = Market(len(doctor_lists), len(hospital_lists))
        if len(doctor_lists) != market.num_doctors or len(hospital_lists) != market.num_hospitals:
            raise ValueError("number of lists does not match market dimensions")
        dprefs, dlen = _pad_lists(doctor_lists, market.num_hospitals, "doctor")
        hprefs, hlen = _pad_lists(hospital_lists, market.num_doctors, "hospital")
        return cls(market, dprefs, dlen, hprefs, hlen)

    # -- views -------------------------------------------------------------

    @property
    def num_doctors(self) -> int:
        return self.market.num_doctors

    @property
    def num_hospitals(self) -> int:
        return self.market.num_hospitals

    @cached_property
    def doctor_lists(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(row[:k]) for row, k in zip(self._dprefs.tolist(), self._dlen.tolist()))

    @cached_property
    def hospital_lists(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(row[:k]) for row, k in zip(self._hprefs.tolist(), self._hlen.tolist()))

    def list_of(self, agent: AgentId) -> tuple[int, ...]:
        self.market.check_agent(agent)
        lists = self.doctor_lists if agent.side is Side.DOCTOR else self.hospital_lists
        return lists[agent.index]

    def list_length(self, agent: AgentId) -> int:
        self.market.check_agent(agent)
        lengths = self._dlen if agent.side is Side.DOCTOR else self._hlen
        return int(lengths[agent.index])

    @cached_property
    def doctor_ranks(self) -> np.ndarray:
        """``doctor_ranks[d, h]`` is the 0-based position of h on d's padded row."""
        return _inverse_ranks(self._dprefs, self.num_hospitals)

    @cached_property
    def hospital_ranks(self) -> np.ndarray:
        return _inverse_ranks(self._hprefs, self.num_doctors)

    def arrays(self, side: Side):
        """(padded prefs, lengths, partner-side inverse ranks, partner-side lengths) for ``side`` proposing."""
        if side is Side.DOCTOR:
            return self._dprefs, self._dlen, self.hospital_ranks, self._hlen
        return self._hprefs, self._hlen, self.doctor_ranks, self._dlen

    @property
    def is_complete(self) -> bool:
        return bool(
            (self._dlen == self.num_hospitals).all() and (self._hlen == self.num_doctors).all()
        )

    def transposed(self) -> "PreferenceProfile":
        """Same preferences with the roles of doctors and hospitals swapped."""
        t = PreferenceProfile(
            self.market.transposed(),
            self._hprefs,
            self._hlen,
            self._dprefs,
            self._dlen,
            hospital_ranks=self.__dict__.get("doctor_ranks"),
        )
        if "hospital_ranks" in self.__dict__:
            t.__dict__["doctor_ranks"] = self.__dict__["hospital_ranks"]
        return t

    # -- value semantics ---------------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, PreferenceProfile):
            return NotImplemented
        return (
            self.market == other.market
            and self.doctor_lists == other.doctor_lists
            and self.hospital_lists == other.hospital_lists
        )

    def __hash__(self):
        return hash((self.market, self.doctor_lists, self.hospital_lists))

    def __repr__(self):
        n, m = self.num_doctors, self.num_hospitals
        if n * m <= 64:
            return f"PreferenceProfile(doctors={list(map(list, self.doctor_lists))}, hospitals={list(map(list, self.hospital_lists))})"
        return f"PreferenceProfile({n}x{m})"

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "num_doctors": self.num_doctors,
            "num_hospitals": self.num_hospitals,
            "doctor_lists": [list(x) for x in self.doctor_lists],
            "hospital_lists": [list(x) for x in self.hospital_lists],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PreferenceProfile":
        missing = {"num_doctors", "num_hospitals", "doctor_lists", "hospital_lists"} - set(data)
        if missing:
            raise ValueError(f"profile is missing keys: {sorted(missing)}")
        market = Market(int(data["num_doctors"]), int(data["num_hospitals"]))
        return cls.from_lists(data["doctor_lists"], data["hospital_lists"], market)


def save_profile(profile: PreferenceProfile, path) -> None:
    Path(path).write_text(json.dumps(profile.to_dict()) + "\n", encoding="utf-8")


def load_profile(path) -> PreferenceProfile:
    return PreferenceProfile.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def generate_uniform_profile(market: Market, seed: int) -> PreferenceProfile:
    """Independent uniformly random complete lists for every agent.

    Rows are shuffled from one numpy ``SFC64`` stream seeded with ``seed``
    (reduced mod 2**64), doctors first, so the profile is a pure function of
    ``(market, seed)``. For hospitals the shuffled row is taken as the
    inverse-rank row (position of each doctor) and the list is its inverse;
    the inverse of a uniform permutation is uniform, and deferred acceptance
    only ever needs the inverse.
    """
    n, m = market.num_doctors, market.num_hospitals
    rng = np.random.Generator(np.random.SFC64(seed & MASK64))
    dprefs = rng.permuted(np.broadcast_to(np.arange(m), (n, m)), axis=1)
    hranks = rng.permuted(np.broadcast_to(np.arange(n), (m, n)), axis=1)
    return PreferenceProfile(
        market,
        dprefs,
        np.full(n, m, dtype=np.int64),
        None,
        np.full(m, n, dtype=np.int64),
        hospital_ranks=hranks,
    )


def truncate_hospital_list(profile: PreferenceProfile, hospital: int, keep: int) -> PreferenceProfile:
    """Keep only the top ``keep`` doctors on ``hospital``'s list.

    ``keep == 0`` leaves the hospital with an empty list, i.e. it finds
    nobody acceptable.
    """
    if not 0 <= hospital < profile.num_hospitals:
        raise IndexError(f"hospital {hospital} out of range")
    current = int(profile._hlen[hospital])
    if not 0 <= keep <= current:
        raise ValueError(f"keep={keep} outside 0..{current} for hospital {hospital}")
    hlen = profile._hlen.copy()
    hlen[hospital] = keep
    # padded rows are untouched, so the inverse-rank tables stay valid
    out = PreferenceProfile(
        profile.market,
        profile._dprefs,
        profile._dlen,
        profile.__dict__.get("_hprefs"),
        hlen,
        hospital_ranks=profile.hospital_ranks,
    )
    if "doctor_ranks" in profile.__dict__:
        out.__dict__["doctor_ranks"] = profile.__dict__["doctor_ranks"]
    return out


@dataclass(frozen=True)
class Matching:
    """A partial one-to-one assignment; ``None`` marks an unmatched agent."""

    doctor_match: tuple[Optional[int], ...]
    hospital_match: tuple[Optional[int], ...]

    def __post_init__(self):
        for d, h in enumerate(self.doctor_match):
            if h is not None and (h >= len(self.hospital_match) or self.hospital_match[h] != d):
                raise ValueError(f"inconsistent matching at doctor {d}")
        for h, d in enumerate(self.hospital_match):
            if d is not None and (d >= len(self.doctor_match) or self.doctor_match[d] != h):
                raise ValueError(f"inconsistent matching at hospital {h}")

    @classmethod
    def from_pairs(cls, market: Market, pairs: Iterable[tuple[int, int]]) -> "Matching":
        dm: list[Optional[int]] = [None] * market.num_doctors
        hm: list[Optional[int]] = [None] * market.num_hospitals
        for d, h in pairs:
            if dm[d] is not None or hm[h] is not None:
                raise ValueError(f"agent appears twice in pairs (d{d}, h{h})")
            dm[d], hm[h] = h, d
        return cls(tuple(dm), tuple(hm))

    @classmethod
    def empty(cls, market: Market) -> "Matching":
        return cls((None,) * market.num_doctors, (None,) * market.num_hospitals)

    @property
    def market(self) -> Market:
        return Market(len(self.doctor_match), len(self.hospital_match))

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return [(d, h) for d, h in enumerate(self.doctor_match) if h is not None]

    def partner(self, agent: AgentId) -> Optional[int]:
        side = self.doctor_match if agent.side is Side.DOCTOR else self.hospital_match
        return side[agent.index]

    def unmatched(self) -> frozenset[AgentId]:
        return frozenset(
            [AgentId.doctor(d) for d, h in enumerate(self.doctor_match) if h is None]
            + [AgentId.hospital(h) for h, d in enumerate(self.hospital_match) if d is None]
        )

    def transposed(self) -> "Matching":
        return Matching(self.hospital_match, self.doctor_match)

    def __len__(self):
        return sum(h is not None for h in self.doctor_match)


def rank_of(profile: PreferenceProfile, agent: AgentId, matching: Matching) -> int:
    """1-based rank of the agent's partner; list length + 1 when unmatched."""
    profile.market.check_agent(agent)
    if matching.market != profile.market:
        raise ValueError("matching dimensions do not match the profile")
    length = profile.list_length(agent)
    partner = matching.partner(agent)
    if partner is None:
        return length + 1
    table = profile.doctor_ranks if agent.side is Side.DOCTOR else profile.hospital_ranks
    pos = int(table[agent.index, partner])
    if pos >= length:
        raise ValueError(f"{agent} is matched to {partner}, which is not on its list")
    return pos + 1


def side_ranks(profile: PreferenceProfile, matching: Matching, side: Side) -> np.ndarray:
    """Vectorised :func:`rank_of` over every agent on one side."""
    if side is Side.DOCTOR:
        partners, lengths, table_name, prefs_name = matching.doctor_match, profile._dlen, "doctor_ranks", "_dprefs"
    else:
        partners, lengths, table_name, prefs_name = matching.hospital_match, profile._hlen, "hospital_ranks", "_hprefs"
    idx = np.array([-1 if p is None else p for p in partners], dtype=np.int64)
    rows = np.nonzero(idx >= 0)[0]
    if table_name in profile.__dict__:
        pos = profile.__dict__[table_name][rows, idx[rows]]
    else:
        sub = getattr(profile, prefs_name)[rows]
        hit = sub == idx[rows, None]
        pos = np.where(hit.any(axis=1), hit.argmax(axis=1), sub.shape[1])
    if (pos >= lengths[rows]).any():
        raise ValueError("matched partner absent from an agent's list")
    ranks = lengths + 1
    ranks[rows] = pos + 1
    return ranks
