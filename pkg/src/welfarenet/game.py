"""Joint investment projects: risk and payoff draws, participation, betrayal, settlement."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Sequence

import numpy as np

from .economy import TaxSchedule, compute_tax, tax_array

SUCCESS = "success"
FAILURE = "failure"
BETRAYAL = "betrayal"

# full subset search up to this many first-condition candidates
ENUMERATION_LIMIT = 12


class GameError(ValueError):
    pass


@dataclass
class Project:
    sponsor: int
    stakes: dict[int, float]
    solo: bool
    risk: float
    gain_ratio: float
    loss_ratio: float

    def __post_init__(self) -> None:
        if not self.stakes or self.total_value <= 0:
            raise GameError("a project needs a positive total stake")
        if self.solo and len(self.stakes) != 1:
            raise GameError("a solo project has exactly one participant")

    @property
    def total_value(self) -> float:
        return sum(self.stakes.values())

    @property
    def participants(self) -> list[int]:
        return list(self.stakes)


@dataclass
class Outcome:
    kind: str
    traitors: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if self.kind not in (SUCCESS, FAILURE, BETRAYAL):
            raise GameError(f"unknown outcome kind {self.kind!r}")
        if self.kind == BETRAYAL and not self.traitors:
            raise GameError("a betrayal needs at least one traitor")
        if self.kind != BETRAYAL and self.traitors:
            raise GameError("traitors listed on a non-betrayal outcome")


@dataclass(frozen=True)
class BetrayalParams:
    gamma: float = 3.0
    beta: float = 3.0
    theta: int = 1
    k: int = 11
    # "wealth" tests the first condition on the agent's holdings, "stake" on its investment
    first_condition: str = "wealth"

    def __post_init__(self) -> None:
        if self.gamma <= 0 or self.beta <= 0:
            raise GameError("gamma and beta must be positive")
        if int(self.theta) != self.theta or self.theta < 1:
            raise GameError("theta must be a positive integer")
        if self.k <= 10:
            raise GameError(f"k must exceed 10, got k={self.k}")
        if self.first_condition not in ("wealth", "stake"):
            raise GameError("first_condition must be 'wealth' or 'stake'")


def project_risk(
    spirits: Sequence[float],
    solo: bool,
    rng: np.random.Generator | None = None,
    solo_penalty: float = 10.0,
    omega1: float | None = None,
) -> float:
    if not spirits:
        raise GameError("project needs at least one participant")
    if omega1 is None:
        omega1 = rng.uniform(-10.0, 10.0)
    risk = sum(spirits) / len(spirits) + omega1
    if solo:
        risk += solo_penalty
    return float(min(100.0, max(0.0, risk)))


def project_payoff_ratios(
    risk: float,
    rng: np.random.Generator | None = None,
    omega2: float | None = None,
    omega3: int | None = None,
    omega3_max: int = 10000,
) -> tuple[float, float]:
    """(gain ratio, loss ratio) for a project of the given risk."""
    if omega2 is None:
        omega2 = rng.uniform(0.0, 100.0)
    if omega3 is None:
        omega3 = int(rng.integers(0, omega3_max + 1))
    gain = (risk + omega2) * 0.01
    loss = (risk + omega3 % (round(risk) + 1)) * 0.005
    return gain, loss


def success_probability(risk: float) -> float:
    return (100.0 - risk) / 100.0


def expected_profit(mu: float, alpha: float, gain: float, loss: float, eta: float, delta: float) -> float:
    return alpha * (mu * gain * (1.0 - eta) + delta) - mu * (1.0 - alpha) * loss


def profit_for(mu: float, risk: float, gain: float, loss: float, schedule: TaxSchedule) -> float:
    """Expected profit with rate and deduction taken from the bracket of ``mu * gain``."""
    eta, delta = schedule.applicable(mu * gain)
    return expected_profit(mu, success_probability(risk), gain, loss, eta, delta)


def profit_for_array(mu: np.ndarray, risk: float, gain: float, loss: float, schedule: TaxSchedule) -> np.ndarray:
    eta, delta = schedule.applicable_array(mu * gain)
    return expected_profit(mu, success_probability(risk), gain, loss, eta, delta)


def decide_stake(
    wealth: float,
    spirit: float,
    aver: float,
    invest_fraction: float,
    reserve_ticks: float,
    cap: float = float("inf"),
) -> float:
    """Stake scaled by risk appetite, limited by ``cap`` and a consumption reserve."""
    mu = min(wealth * (spirit / 100.0) * invest_fraction, cap)
    room = wealth - reserve_ticks * aver
    if room <= 0.0 or mu <= 0.0:
        return 0.0
    return min(mu, room)


def check_individual_betrayal(
    wealth: float,
    stake: float,
    total_value: float,
    p: BetrayalParams,
    aver: float,
    min_guarantee: float,
) -> bool:
    if total_value <= 0.0:
        return False
    first = wealth if p.first_condition == "wealth" else stake
    if not first < p.gamma * aver:
        return False
    if not total_value >= p.beta * stake:
        return False
    surplus = (total_value + wealth) - (p.theta * aver) * p.k
    return surplus > min_guarantee


def check_group_betrayal(
    subset: Sequence[tuple[float, float]],
    total_value: float,
    p: BetrayalParams,
    aver: float,
    min_guarantee: float,
) -> bool:
    """``subset`` holds ``(wealth, stake)`` pairs of the would-be traitors."""
    if not subset or total_value <= 0.0:
        return False
    d = len(subset)
    firsts = [w if p.first_condition == "wealth" else s for w, s in subset]
    if not max(firsts) < p.gamma * aver:
        return False
    if not total_value >= p.beta * sum(s for _, s in subset):
        return False
    surplus = (total_value + sum(w for w, _ in subset)) - (p.theta * aver * d) * p.k
    return surplus > min_guarantee * d


def select_coalition(
    members: Sequence[int],
    wealth: dict[int, float],
    stakes: dict[int, float],
    p: BetrayalParams,
    aver: float,
    min_guarantee: float,
) -> frozenset[int]:
    """Pick who betrays, scanning ``members`` in the given (already shuffled) order.

    The first member passing the individual test betrays alone.  Failing
    that, the largest passing group among members that meet the first
    condition is chosen, earliest in scan order on ties.  Empty result means
    nobody betrays.
    """
    total = sum(stakes.values())
    for m in members:
        if check_individual_betrayal(wealth[m], stakes[m], total, p, aver, min_guarantee):
            return frozenset((m,))
    cut = p.gamma * aver
    pool = [m for m in members if (wealth[m] if p.first_condition == "wealth" else stakes[m]) < cut]
    if len(pool) < 2:
        return frozenset()
    if len(pool) <= ENUMERATION_LIMIT:
        for d in range(len(pool), 1, -1):
            for combo in combinations(pool, d):
                if check_group_betrayal([(wealth[m], stakes[m]) for m in combo], total, p, aver, min_guarantee):
                    return frozenset(combo)
        return frozenset()
    # greedy: rank by what a member brings to the surplus test net of its stake
    ranked = sorted(pool, key=lambda m: stakes[m] - wealth[m])
    for d in range(len(ranked), 1, -1):
        combo = ranked[:d]
        if check_group_betrayal([(wealth[m], stakes[m]) for m in combo], total, p, aver, min_guarantee):
            return frozenset(combo)
    return frozenset()


@lru_cache(maxsize=None)
def _subset_table(m: int) -> tuple[np.ndarray, np.ndarray]:
    """All subsets of ``m`` positions of size >= 2, best-first.

    Rows are ordered by size descending, then by the lexicographic order of
    their position tuples, matching ``itertools.combinations``.
    """
    masks = np.arange(1, 1 << m, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(m)) & 1).astype(bool)
    size = bits.sum(axis=1)
    # heavier weight on earlier positions: larger key == lexicographically smaller tuple
    key = (bits * (1 << np.arange(m - 1, -1, -1))).sum(axis=1)
    keep = size >= 2
    bits, size, key = bits[keep], size[keep], key[keep]
    order = np.lexsort((-key, -size))
    return bits[order].astype(np.float64), size[order]


def select_coalition_array(
    members: np.ndarray,
    wealth: np.ndarray,
    stakes: np.ndarray,
    total: float,
    p: BetrayalParams,
    aver: float,
    min_guarantee: float,
) -> np.ndarray:
    """Array twin of :func:`select_coalition`.

    ``members`` are ids in scan order; ``wealth`` and ``stakes`` are aligned
    with them.  Returns the traitor ids (possibly empty).
    """
    if total <= 0.0 or members.size == 0:
        return members[:0]
    first = wealth if p.first_condition == "wealth" else stakes
    cond1 = first < p.gamma * aver
    ok = cond1 & (total >= p.beta * stakes) & ((total + wealth) - (p.theta * aver) * p.k > min_guarantee)
    if ok.any():
        return members[np.argmax(ok)][None]
    pool = np.flatnonzero(cond1)
    if pool.size < 2:
        return members[:0]
    ps, pw = stakes[pool], wealth[pool]
    need = p.theta * aver * p.k + min_guarantee
    if pool.size <= ENUMERATION_LIMIT:
        bits, size = _subset_table(int(pool.size))
        passing = (total >= p.beta * (bits @ ps)) & ((total + bits @ pw) > need * size)
        if not passing.any():
            return members[:0]
        return members[pool[bits[np.argmax(passing)].astype(bool)]]
    ranked = pool[np.argsort(ps - pw, kind="stable")]
    cs = np.cumsum(stakes[ranked])
    cw = np.cumsum(wealth[ranked])
    d = np.arange(1, ranked.size + 1)
    passing = (total >= p.beta * cs) & ((total + cw) > need * d)
    passing[0] = False
    hits = np.flatnonzero(passing)
    if hits.size == 0:
        return members[:0]
    return members[ranked[: hits[-1] + 1]]


def resolve_project(project: Project, rng: np.random.Generator) -> Outcome:
    u = rng.uniform(0.0, 100.0)
    return Outcome(SUCCESS if u > project.risk else FAILURE)


@dataclass(frozen=True)
class LedgerEntry:
    agent: int
    amount: float
    kind: str  # "payout", "tax", "refund", "loot"


def settle(project: Project, outcome: Outcome, schedule: TaxSchedule) -> list[LedgerEntry]:
    """Cash movements after resolution; stakes are assumed already withdrawn.

    ``tax`` entries are negative amounts owed by the agent to the welfare
    center.
    """
    entries: list[LedgerEntry] = []
    if outcome.kind == SUCCESS:
        for a, mu in project.stakes.items():
            profit = mu * project.gain_ratio
            entries.append(LedgerEntry(a, mu + profit, "payout"))
            tax = compute_tax(profit, schedule)
            if tax:
                entries.append(LedgerEntry(a, -tax, "tax"))
    elif outcome.kind == FAILURE:
        if outcome.traitors:
            raise GameError("traitors listed on a non-betrayal outcome")
        for a, mu in project.stakes.items():
            entries.append(LedgerEntry(a, mu * (1.0 - project.loss_ratio), "refund"))
    else:
        if not outcome.traitors <= set(project.stakes):
            raise GameError("traitors must be project participants")
        share = project.total_value / len(outcome.traitors)
        for a in sorted(outcome.traitors):
            entries.append(LedgerEntry(a, share, "loot"))
    return entries


def settle_array(
    stakes: np.ndarray,
    kind: str,
    traitor_mask: np.ndarray | None,
    gain_ratio: float,
    loss_ratio: float,
    schedule: TaxSchedule,
) -> tuple[np.ndarray, np.ndarray]:
    """Array twin of :func:`settle`: (amount credited, tax owed) per participant."""
    if kind == SUCCESS:
        profit = stakes * gain_ratio
        return stakes + profit, tax_array(profit, schedule)
    zero = np.zeros_like(stakes)
    if kind == FAILURE:
        return stakes * (1.0 - loss_ratio), zero
    if traitor_mask is None or not traitor_mask.any():
        raise GameError("a betrayal needs at least one traitor")
    share = stakes.sum() / np.count_nonzero(traitor_mask)
    return np.where(traitor_mask, share, 0.0), zero
