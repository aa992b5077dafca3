"""Progressive taxation, tiered poverty relief and the welfare controller."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class EconomyError(ValueError):
    pass


@dataclass
class TaxSchedule:
    """Marginal bracket table.

    ``lower_bounds[j]`` is where bracket ``j`` starts; the last bracket is
    open-ended.  Tax on an income inside bracket ``j`` is
    ``income * rates[j] - quick_deductions[j]``, which equals the sum of the
    marginal slices.
    """

    lower_bounds: list[float]
    rates: list[float]
    exemption_threshold: float = 0.0
    quick_deductions: list[float] = field(init=False)

    def __post_init__(self) -> None:
        self.lower_bounds = [float(b) for b in self.lower_bounds]
        self.rates = [float(r) for r in self.rates]
        if not self.lower_bounds or len(self.lower_bounds) != len(self.rates):
            raise EconomyError("need one rate per bracket and at least one bracket")
        if self.lower_bounds[0] != 0.0:
            raise EconomyError("first bracket must start at 0")
        for lo, hi in zip(self.lower_bounds, self.lower_bounds[1:]):
            if hi <= lo:
                raise EconomyError("bracket lower bounds must be strictly increasing")
        for r in self.rates:
            if not 0.0 <= r <= 1.0:
                raise EconomyError(f"bracket rate {r} outside [0, 1]")
        if self.exemption_threshold < 0:
            raise EconomyError("exemption threshold must be >= 0")
        self.recompute_deductions()

    @classmethod
    def from_pairs(cls, brackets: Sequence[Sequence[float]], exemption_threshold: float = 0.0) -> "TaxSchedule":
        return cls([b[0] for b in brackets], [b[1] for b in brackets], exemption_threshold)

    def recompute_deductions(self) -> None:
        # delta_j = upper(j-1) * (rate_j - rate_{j-1}) + delta_{j-1}
        d = [0.0]
        for j in range(1, len(self.rates)):
            d.append(self.lower_bounds[j] * (self.rates[j] - self.rates[j - 1]) + d[-1])
        self.quick_deductions = d
        self._lower_arr = np.asarray(self.lower_bounds)
        self._rates_arr = np.asarray(self.rates)
        self._deduct_arr = np.asarray(d)

    def bracket_index(self, income: float) -> int:
        return max(bisect.bisect_right(self.lower_bounds, income) - 1, 0)

    def applicable(self, income: float) -> tuple[float, float]:
        """(rate, quick deduction) that apply to ``income``; zeros when exempt."""
        if income < self.exemption_threshold or income <= 0.0:
            return 0.0, 0.0
        j = self.bracket_index(income)
        return self.rates[j], self.quick_deductions[j]

    def applicable_array(self, income: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        j = np.searchsorted(self._lower_arr, income, side="right")
        j -= 1
        np.maximum(j, 0, out=j)
        eta = self._rates_arr[j]
        delta = self._deduct_arr[j]
        # a positive threshold already excludes every income <= 0
        exempt = income < self.exemption_threshold if self.exemption_threshold > 0.0 else income <= 0.0
        if exempt.any():
            eta[exempt] = 0.0
            delta[exempt] = 0.0
        return eta, delta

    @property
    def top_rate(self) -> float:
        return self.rates[-1]

    def to_dict(self) -> dict:
        return {
            "brackets": [[b, r] for b, r in zip(self.lower_bounds, self.rates)],
            "exemption_threshold": self.exemption_threshold,
        }


def compute_tax(income: float, s: TaxSchedule) -> float:
    if income < s.exemption_threshold or income <= 0.0:
        return 0.0
    j = s.bracket_index(income)
    return income * s.rates[j] - s.quick_deductions[j]


def tax_array(income: np.ndarray, s: TaxSchedule) -> np.ndarray:
    eta, delta = s.applicable_array(income)
    return income * eta - delta


def marginal_tax(income: float, s: TaxSchedule) -> float:
    """Slice-by-slice sum; kept as an independent route to the same tax."""
    if income < s.exemption_threshold or income <= 0.0:
        return 0.0
    total = 0.0
    bounds = s.lower_bounds + [float("inf")]
    for j, rate in enumerate(s.rates):
        lo, hi = bounds[j], bounds[j + 1]
        if income <= lo:
            break
        total += (min(income, hi) - lo) * rate
    return total


@dataclass
class ControllerState:
    rate_step: float = 0.01
    min_step: float = 1.0
    rate_bounds: tuple[float, float] = (0.01, 0.45)
    min_bounds: tuple[float, float] = (0.0, float("inf"))
    surplus_window: int = 10
    surplus_streak: int = 0


@dataclass
class WelfareCenter:
    wealth: float = 0.0


@dataclass
class WelfarePolicy:
    schedule: TaxSchedule
    min_guarantee: float
    aver: float
    issuance_rates: tuple[float, float, float] = (1.0, 0.75, 0.5)
    controller: ControllerState = field(default_factory=ControllerState)

    def __post_init__(self) -> None:
        if self.min_guarantee < 0:
            raise EconomyError("min_guarantee must be >= 0")
        if len(self.issuance_rates) != 3:
            raise EconomyError("exactly three issuance rates are required")
        self.issuance_rates = tuple(float(r) for r in self.issuance_rates)
        for r in self.issuance_rates:
            if not 0.0 <= r <= 1.0:
                raise EconomyError(f"issuance rate {r} outside [0, 1]")
        a, b, c = self.issuance_rates
        if not a >= b >= c:
            raise EconomyError("issuance rates must not increase from poorest to least-poor level")


def poverty_level(wealth: float, min_guarantee: float) -> int:
    """0 = not poor; 1 = poorest third below the guarantee, 3 = top third."""
    m = min_guarantee
    if wealth >= m:
        return 0
    if wealth >= 2.0 * m / 3.0:
        return 3
    if wealth >= m / 3.0:
        return 2
    return 1


def compute_subsidy(wealth: float, policy: WelfarePolicy) -> float:
    m = policy.min_guarantee
    if m <= 0.0:
        return 0.0
    level = poverty_level(wealth, m)
    if level == 0:
        return 0.0
    return policy.issuance_rates[level - 1] * (m - wealth)


def _clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


def policy_step(policy: WelfarePolicy, center: WelfareCenter, projected_payout: float) -> str:
    """Adjust tax rates and the minimum guarantee in place.

    Returns ``"shortfall"``, ``"surplus"`` (adjustment fired after a full
    window of surpluses) or ``"hold"``.
    """
    c = policy.controller
    lo_r, hi_r = c.rate_bounds
    lo_m, hi_m = c.min_bounds
    s = policy.schedule
    if center.wealth < projected_payout:
        policy.min_guarantee = _clamp(policy.min_guarantee - c.min_step, lo_m, hi_m)
        s.rates = [_clamp(r + c.rate_step, lo_r, hi_r) for r in s.rates]
        s.recompute_deductions()
        c.surplus_streak = 0
        return "shortfall"
    c.surplus_streak += 1
    if c.surplus_streak >= c.surplus_window:
        s.rates = [_clamp(r - c.rate_step, lo_r, hi_r) for r in s.rates]
        s.recompute_deductions()
        policy.min_guarantee = _clamp(policy.min_guarantee + c.min_step, lo_m, hi_m)
        c.surplus_streak = 0
        return "surplus"
    return "hold"


def subsidy_array(wealth: np.ndarray, policy: WelfarePolicy) -> np.ndarray:
    """Vectorised :func:`compute_subsidy` over a wealth vector."""
    m = policy.min_guarantee
    if m <= 0.0:
        return np.zeros_like(wealth)
    r1, r2, r3 = policy.issuance_rates
    rate = np.where(wealth >= m, 0.0, np.where(wealth >= 2.0 * m / 3.0, r3, np.where(wealth >= m / 3.0, r2, r1)))
    return rate * (m - wealth)


def poor_mask(wealth: np.ndarray, min_guarantee: float) -> np.ndarray:
    return wealth < min_guarantee
