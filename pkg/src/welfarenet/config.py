"""Run configuration: dataclasses plus JSON loading with field-level diagnostics."""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration.  ``problems`` lists ``(field path, message)`` pairs."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = problems
        super().__init__("; ".join(f"{p}: {m}" for p, m in problems))


@dataclass
class NetworkConfig:
    n: int = 1000
    k: int = 10
    p: float = 0.1


@dataclass
class AgentInitConfig:
    wealth_min: float = 50.0
    wealth_max: float = 150.0
    spirit_min: int = 0
    spirit_max: int = 100


@dataclass
class TaxConfig:
    brackets: list[list[float]] = field(default_factory=lambda: [[0.0, 0.05], [50.0, 0.10], [200.0, 0.20]])
    exemption_threshold: float = 5.0


@dataclass
class WelfareConfig:
    min_guarantee: float = 20.0
    aver: float = 1.0
    issuance_rates: list[float] = field(default_factory=lambda: [1.0, 0.75, 0.5])
    controller_enabled: bool = True
    rate_step: float = 0.01
    min_step_fraction: float = 0.05
    rate_bounds: list[float] = field(default_factory=lambda: [0.01, 0.45])
    min_bounds_factor: list[float] = field(default_factory=lambda: [0.2, 2.0])
    surplus_window: int = 10
    center_initial_fraction: float = 0.10


@dataclass
class GameConfig:
    gamma: float = 30.0
    beta: float = 3.0
    theta: int = 1
    k: int = 11
    first_condition: str = "wealth"
    invest_fraction: float = 0.5
    reserve_ticks: float = 5.0
    stake_cap_ticks: float = 10.0
    white_fraction: float = 0.5
    solo_penalty: float = 10.0
    sponsor_probability: float = 0.2
    sponsor_can_betray: bool = True
    omega3_max: int = 10000


@dataclass
class RunConfig:
    seed: int
    ticks: int
    schema_version: int = SCHEMA_VERSION
    network: NetworkConfig = field(default_factory=NetworkConfig)
    agents: AgentInitConfig = field(default_factory=AgentInitConfig)
    tax: TaxConfig = field(default_factory=TaxConfig)
    welfare: WelfareConfig = field(default_factory=WelfareConfig)
    game: GameConfig = field(default_factory=GameConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, path: str, value: Any) -> "RunConfig":
        """Copy with one dotted field (e.g. ``welfare.controller_enabled``) changed."""
        raw = self.to_dict()
        set_path(raw, path, value)
        return from_dict(raw)

    def validate(self) -> None:
        validate(self)


REQUIRED = ("schema_version", "seed", "ticks")

_NESTED = {
    "NetworkConfig": NetworkConfig,
    "AgentInitConfig": AgentInitConfig,
    "TaxConfig": TaxConfig,
    "WelfareConfig": WelfareConfig,
    "GameConfig": GameConfig,
}


def set_path(raw: dict, path: str, value: Any) -> None:
    keys = path.split(".")
    node = raw
    for key in keys[:-1]:
        if not isinstance(node.get(key), dict):
            raise ConfigError([(path, "not a valid configuration field")])
        node = node[key]
    if keys[-1] not in node:
        raise ConfigError([(path, "not a valid configuration field")])
    node[keys[-1]] = value


def _build(cls, raw: Any, prefix: str, problems: list) -> Any:
    if not isinstance(raw, dict):
        problems.append((prefix or "<root>", "expected an object"))
        return None
    known = {f.name: f for f in fields(cls)}
    for key in raw:
        if key not in known:
            problems.append((f"{prefix}{key}", "unknown field"))
    kwargs = {}
    for name, f in known.items():
        if name not in raw:
            continue
        val = raw[name]
        ftype = f.type
        path = f"{prefix}{name}"
        if ftype in _NESTED:
            kwargs[name] = _build(_NESTED[ftype], val, path + ".", problems)
            continue
        if ftype == "bool":
            if not isinstance(val, bool):
                problems.append((path, f"expected a boolean, got {val!r}"))
                continue
        elif ftype == "int":
            if isinstance(val, bool) or not (isinstance(val, int) or (isinstance(val, float) and val.is_integer())):
                problems.append((path, f"expected an integer, got {val!r}"))
                continue
            val = int(val)
        elif ftype == "float":
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                problems.append((path, f"expected a number, got {val!r}"))
                continue
            val = float(val)
        elif ftype == "str":
            if not isinstance(val, str):
                problems.append((path, f"expected a string, got {val!r}"))
                continue
        elif ftype.startswith("list"):
            if not isinstance(val, list):
                problems.append((path, f"expected a list, got {val!r}"))
                continue
            val = copy.deepcopy(val)
        kwargs[name] = val
    if problems:
        return None
    return cls(**kwargs)


def from_dict(raw: Any) -> RunConfig:
    problems: list[tuple[str, str]] = []
    if isinstance(raw, dict):
        for key in REQUIRED:
            if key not in raw:
                problems.append((key, "required field is missing"))
    if problems:
        raise ConfigError(problems)
    cfg = _build(RunConfig, raw, "", problems)
    if problems:
        raise ConfigError(problems)
    validate(cfg)
    return cfg


def load(path: str | Path) -> RunConfig:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([(f"line {exc.lineno} column {exc.colno}", exc.msg)]) from None
    return from_dict(raw)


def dump(cfg: RunConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")


def validate(cfg: RunConfig) -> None:
    pr: list[tuple[str, str]] = []

    def need(ok: bool, path: str, msg: str) -> None:
        if not ok:
            pr.append((path, msg))

    need(cfg.schema_version == SCHEMA_VERSION, "schema_version", f"unsupported version, expected {SCHEMA_VERSION}")
    need(cfg.ticks >= 0, "ticks", "must be >= 0")
    need(0 <= cfg.seed < 2**64, "seed", "must be a 64-bit unsigned integer")
    net = cfg.network
    need(net.n >= 3, "network.n", "must be >= 3")
    need(net.k > 0 and net.k % 2 == 0, "network.k", "must be a positive even integer")
    need(net.k < net.n, "network.k", "must be < network.n")
    need(0.0 <= net.p <= 1.0, "network.p", "must lie in [0, 1]")
    a = cfg.agents
    need(a.wealth_min <= a.wealth_max, "agents.wealth_max", "must be >= agents.wealth_min")
    need(0 <= a.spirit_min <= a.spirit_max <= 100, "agents.spirit_min", "need 0 <= spirit_min <= spirit_max <= 100")
    t = cfg.tax
    if not t.brackets or any(not isinstance(b, list) or len(b) != 2 for b in t.brackets):
        pr.append(("tax.brackets", "must be a non-empty list of [lower_bound, rate] pairs"))
    else:
        lows = [b[0] for b in t.brackets]
        need(lows[0] == 0, "tax.brackets", "first bracket must start at 0")
        need(all(x < y for x, y in zip(lows, lows[1:])), "tax.brackets", "lower bounds must be strictly increasing")
        need(all(0 <= b[1] <= 1 for b in t.brackets), "tax.brackets", "rates must lie in [0, 1]")
    need(t.exemption_threshold >= 0, "tax.exemption_threshold", "must be >= 0")
    w = cfg.welfare
    need(w.min_guarantee > 0, "welfare.min_guarantee", "must be > 0")
    need(w.aver >= 0, "welfare.aver", "must be >= 0")
    rates = w.issuance_rates
    need(len(rates) == 3 and all(0 <= r <= 1 for r in rates), "welfare.issuance_rates", "need three rates in [0, 1]")
    if len(rates) == 3:
        need(rates[0] >= rates[1] >= rates[2], "welfare.issuance_rates", "must not increase from poorest level")
    need(w.rate_step >= 0, "welfare.rate_step", "must be >= 0")
    need(w.min_step_fraction >= 0, "welfare.min_step_fraction", "must be >= 0")
    need(len(w.rate_bounds) == 2 and 0 <= w.rate_bounds[0] <= w.rate_bounds[1] <= 1, "welfare.rate_bounds", "need [lo, hi] within [0, 1]")
    need(len(w.min_bounds_factor) == 2 and 0 <= w.min_bounds_factor[0] <= 1 <= w.min_bounds_factor[1],
         "welfare.min_bounds_factor", "need [lo, hi] with lo <= 1 <= hi")
    need(w.surplus_window >= 1, "welfare.surplus_window", "must be >= 1")
    need(w.center_initial_fraction >= 0, "welfare.center_initial_fraction", "must be >= 0")
    g = cfg.game
    need(g.gamma > 0, "game.gamma", "must be > 0")
    need(g.beta > 0, "game.beta", "must be > 0")
    need(g.theta >= 1, "game.theta", "must be a positive integer")
    need(g.k > 10, "game.k", "must exceed 10")
    need(g.first_condition in ("wealth", "stake"), "game.first_condition", "must be 'wealth' or 'stake'")
    need(0 <= g.invest_fraction <= 1, "game.invest_fraction", "must lie in [0, 1]")
    need(g.reserve_ticks >= 0, "game.reserve_ticks", "must be >= 0")
    need(g.stake_cap_ticks > 0, "game.stake_cap_ticks", "must be > 0")
    need(0 <= g.white_fraction <= 1, "game.white_fraction", "must lie in [0, 1]")
    need(g.solo_penalty >= 0, "game.solo_penalty", "must be >= 0")
    need(0 <= g.sponsor_probability <= 1, "game.sponsor_probability", "must lie in [0, 1]")
    need(g.omega3_max >= 0, "game.omega3_max", "must be >= 0")
    if pr:
        raise ConfigError(pr)
