"""Agent state, red/white contact bookkeeping and the shared blacklist.

Two representations of the contact lists live here.  :class:`Agent` keeps a
per-partner dict and is updated one pair at a time by
:func:`record_cooperation_result`; it is the reference for the update rule.
:class:`ContactBook` stores the whole population as ``n x n`` arrays so the
engine can update every pair in a project with a handful of array ops.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

RED = "red"
WHITE = "white"

UNKNOWN_CODE, WHITE_CODE, RED_CODE = 0, 1, 2


class BlacklistError(ValueError):
    pass


@dataclass
class ContactRecord:
    classification: str = WHITE
    coop_count: int = 0


@dataclass
class Agent:
    id: int
    wealth: float
    spirit: float
    contacts: dict[int, ContactRecord] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 <= self.spirit <= 100.0:
            raise ValueError(f"spirit must lie in [0, 100], got {self.spirit}")

    def red_list(self) -> list[int]:
        return sorted(p for p, c in self.contacts.items() if c.classification == RED)

    def white_list(self) -> list[int]:
        return sorted(p for p, c in self.contacts.items() if c.classification == WHITE)


def record_cooperation_result(agent: Agent, partner: int, success: bool) -> Agent:
    """Update ``agent``'s view of ``partner`` after a joint project.

    Success: unknown -> white, white -> red (count 1), red -> count + 1.
    Failure: red count - 1, demoting to white when it was 1; white and
    unknown partners are left as they are.
    """
    if partner == agent.id:
        raise ValueError("an agent does not keep a contact record for itself")
    rec = agent.contacts.get(partner)
    if success:
        if rec is None:
            agent.contacts[partner] = ContactRecord(WHITE, 0)
        elif rec.classification == WHITE:
            rec.classification = RED
            rec.coop_count = 1
        else:
            rec.coop_count += 1
    elif rec is not None and rec.classification == RED:
        if rec.coop_count <= 1:
            rec.classification = WHITE
            rec.coop_count = 0
        else:
            rec.coop_count -= 1
    return agent


class ContactBook:
    """Population-wide contact lists held in one ``n x n`` integer array.

    ``state[i, j]`` encodes how ``i`` files ``j``: 0 unknown, 1 white, and
    ``c >= 2`` red with cooperation count ``c - 1``.  Under this coding a
    success is ``+1`` for every pair and a failure is ``-1`` wherever the
    code is at least 2, which is exactly the procedural rule.

    With ``track_tallies`` the raw per-pair success and failure counts are
    kept too; they back the success-versus-failure reading of the lists
    offered by :meth:`tally_class`.  Memory is ``O(n^2)``.
    """

    def __init__(self, n: int, track_tallies: bool = False):
        self.n = n
        self.state = np.zeros((n, n), dtype=np.int32)
        self.track_tallies = track_tallies
        if track_tallies:
            self.successes = np.zeros((n, n), dtype=np.int32)
            self.failures = np.zeros((n, n), dtype=np.int32)

    @classmethod
    def from_adjacency(cls, adjacency: Sequence[Sequence[int]], track_tallies: bool = False) -> "ContactBook":
        book = cls(len(adjacency), track_tallies)
        for i, nbrs in enumerate(adjacency):
            book.state[i, list(nbrs)] = WHITE_CODE
        return book

    def red(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.state[i] >= RED_CODE)

    def white(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.state[i] == WHITE_CODE)

    def record(self, ids: Sequence[int], success: bool) -> None:
        """Apply the pairwise update to every ordered pair of distinct ``ids``."""
        idx = np.asarray(ids, dtype=np.intp)
        if idx.size < 2:
            return
        member = np.zeros(self.n, dtype=bool)
        member[idx] = True
        # the diagonal is always 0 (unknown), so it is untouched by a failure
        rows = self.state[idx]
        if success:
            rows += member
            rows[np.arange(idx.size), idx] -= 1
        else:
            rows -= (rows >= RED_CODE) & member
        self.state[idx] = rows
        if self.track_tallies:
            tally = self.successes if success else self.failures
            t = tally[idx]
            t += member
            t[np.arange(idx.size), idx] -= 1
            tally[idx] = t

    def record_pair(self, i: int, j: int, success: bool) -> None:
        """Update both ``i``'s view of ``j`` and ``j``'s view of ``i``."""
        if i == j:
            raise ValueError("an agent does not keep a contact record for itself")
        self.record([i, j], success)

    def classification(self, i: int, j: int) -> str | None:
        code = self.state[i, j]
        return None if code == UNKNOWN_CODE else RED if code >= RED_CODE else WHITE

    def coop_count(self, i: int, j: int) -> int:
        return max(int(self.state[i, j]) - 1, 0)

    def tally_class(self, i: int, j: int) -> str | None:
        """Red if ``i`` has succeeded with ``j`` more often than failed, else white.

        Diagnostic only; list membership follows the procedural rule.
        """
        if not self.track_tallies:
            raise RuntimeError("tallies are not being tracked")
        if self.state[i, j] == UNKNOWN_CODE:
            return None
        return RED if self.successes[i, j] > self.failures[i, j] else WHITE

    def as_records(self, i: int) -> dict[int, ContactRecord]:
        return {
            int(j): ContactRecord(self.classification(i, j), self.coop_count(i, j))
            for j in np.flatnonzero(self.state[i])
        }

    def list_sizes(self, i: int) -> tuple[int, int]:
        row = self.state[i]
        return int(np.count_nonzero(row >= RED_CODE)), int(np.count_nonzero(row == WHITE_CODE))


@dataclass
class Population:
    """Wealth, SPIRIT and contacts for every agent, indexed by node id."""

    wealth: np.ndarray
    spirit: np.ndarray
    contacts: ContactBook

    def __len__(self) -> int:
        return self.wealth.size

    def agent(self, i: int) -> Agent:
        return Agent(i, float(self.wealth[i]), float(self.spirit[i]), self.contacts.as_records(i))

    def snapshot(self, i: int, blacklisted: bool = False) -> dict:
        red, white = self.contacts.list_sizes(i)
        return {
            "id": i,
            "wealth": float(self.wealth[i]),
            "spirit": float(self.spirit[i]),
            "red": red,
            "white": white,
            "blacklisted": blacklisted,
        }


@dataclass
class BlacklistRegistry:
    """Global registry of traitors; an entry is active for ``now <= tick < expiry``.

    ``in`` checks raw membership and is exact once :meth:`purge` has run for
    the current tick.
    """

    entries: dict[int, int] = field(default_factory=dict)

    def add(self, agent_id: int, now: int, k: int, t_len: int = 1) -> int:
        if k <= 10:
            raise BlacklistError(f"blacklist multiplier k must exceed 10, got k={k}")
        expiry = now + k * t_len
        self.entries[agent_id] = max(expiry, self.entries.get(agent_id, expiry))
        return self.entries[agent_id]

    def contains(self, agent_id: int, tick: int) -> bool:
        exp = self.entries.get(agent_id)
        return exp is not None and tick < exp

    def purge(self, tick: int) -> list[int]:
        """Drop entries whose expiry has been reached; returns released ids."""
        done = sorted(a for a, e in self.entries.items() if e <= tick)
        for a in done:
            del self.entries[a]
        return done

    def mask(self, n: int) -> np.ndarray:
        m = np.zeros(n, dtype=bool)
        if self.entries:
            m[list(self.entries)] = True
        return m

    def __contains__(self, agent_id: int) -> bool:
        return agent_id in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def blacklist_add(reg: BlacklistRegistry, agent_id: int, now: int, k: int, t_len: int = 1) -> BlacklistRegistry:
    reg.add(agent_id, now, k, t_len)
    return reg


def _white_sample(white: Sequence[int], white_fraction: float, rng: np.random.Generator) -> list[int]:
    n_white = int(white_fraction * len(white) + 0.5)
    if n_white >= len(white):
        return list(white)
    if n_white <= 0:
        return []
    pick = np.sort(rng.permutation(len(white))[:n_white])
    return [white[i] for i in pick]


def eligible_invitees(
    sponsor: Agent,
    population: Sequence[Agent],
    reg: BlacklistRegistry,
    white_fraction: float,
    rng: np.random.Generator,
) -> list[int]:
    """Red contacts plus a random share of white contacts, filtered.

    Candidates must be off the blacklist and hold more than half the
    sponsor's wealth.  The white sample has ``round(white_fraction * |white|)``
    members (halves round up) and is drawn before filtering.
    """
    picked = sponsor.red_list() + _white_sample(sponsor.white_list(), white_fraction, rng)
    floor = sponsor.wealth / 2.0
    return [c for c in picked if c not in reg and population[c].wealth > floor]


def eligible_invitees_array(
    sponsor: int,
    pop: Population,
    blocked: np.ndarray,
    white_fraction: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Array form of :func:`eligible_invitees` with identical draws."""
    row = pop.contacts.state[sponsor]
    red = np.flatnonzero(row >= RED_CODE)
    white = np.flatnonzero(row == WHITE_CODE)
    n_white = int(white_fraction * white.size + 0.5)
    if 0 < n_white < white.size:
        white = white[np.sort(rng.permutation(white.size)[:n_white])]
    elif n_white <= 0:
        white = white[:0]
    picked = np.concatenate((red, white))
    if picked.size == 0:
        return picked
    keep = ~blocked[picked] & (pop.wealth[picked] > pop.wealth[sponsor] / 2.0)
    return picked[keep]
