"""Deterministic tick loop.

Seed derivation
---------------
``numpy.random.SeedSequence(config.seed).spawn(4)`` yields four children in
this order: topology, agent initialisation, visit order, project draws.  The
topology child drives a generator that emits successive 63-bit graph seeds
(a fresh one each time a disconnected graph has to be rejected); the other
three children each seed one ``numpy.random.Generator``.  Node ids are
0-based everywhere.

Tick phases
-----------
1. release agents whose blacklist term has expired
2. every agent off the blacklist, in shuffled order, sponsors a project with
   ``sponsor_probability``
3. every agent consumes ``aver``
4. the welfare center pays tiered subsidies (pro-rata if the treasury is short)
5. the policy controller adjusts rates and the minimum guarantee
6. a :class:`MetricsRecord` is emitted
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Iterator

import numpy as np

from . import game
from .agents import BlacklistRegistry, ContactBook, Population, eligible_invitees_array
from .config import RunConfig
from .economy import (
    ControllerState,
    TaxSchedule,
    WelfareCenter,
    WelfarePolicy,
    policy_step,
    poor_mask,
    subsidy_array,
)
from .topology import SmallWorldParams, Topology, generate_small_world, is_connected

log = logging.getLogger(__name__)

MAX_TOPOLOGY_ATTEMPTS = 100
LEDGER_TOL = 1e-6


class SimulationError(RuntimeError):
    def __init__(self, tick: int, cause: Exception):
        self.tick = tick
        self.cause = cause
        super().__init__(f"tick {tick}: {cause}")


@dataclass
class MetricsRecord:
    tick: int
    betrayal_count: int
    projects_attempted: int
    projects_succeeded: int
    invitations_issued: int
    invitations_accepted: int
    total_agent_wealth: float
    center_wealth: float
    current_rate: float
    current_min_guarantee: float
    blacklist_size: int
    poor_count: int
    # proxies for the betrayal rate and the likelihood of cooperation
    betrayal_rate: float = 0.0
    acceptance_rate: float = 0.0
    gains: float = 0.0
    losses: float = 0.0
    consumption: float = 0.0
    taxes: float = 0.0
    subsidies: float = 0.0
    controller_action: str = "frozen"


METRICS_FIELDS = [f.name for f in fields(MetricsRecord)]

EVENT_FIELDS = [
    "tick", "project", "sponsor", "solo", "participants", "stakes",
    "risk", "gain_ratio", "loss_ratio", "outcome", "traitors",
]


@dataclass
class TickLedger:
    gains: float = 0.0
    losses: float = 0.0
    consumption: float = 0.0
    taxes: float = 0.0
    subsidies: float = 0.0
    betrayal_transfer: float = 0.0


@dataclass
class LedgerCheck:
    ok: bool
    expected: float
    actual: float

    @property
    def diff(self) -> float:
        return self.actual - self.expected

    def __bool__(self) -> bool:
        return self.ok

    def report(self) -> str:
        return f"expected delta {self.expected:.9g}, observed {self.actual:.9g}, diff {self.diff:.3g}"


def ledger_check(before: float, after: float, ledger: TickLedger, tol: float = LEDGER_TOL) -> LedgerCheck:
    """Closed-system identity: change in total wealth = gains - losses - consumption.

    ``before``/``after`` are agent plus center wealth.  Taxes, subsidies and
    betrayal loot move money around without creating or destroying it.
    The tolerance is absolute.
    """
    expected = ledger.gains - ledger.losses - ledger.consumption
    actual = after - before
    return LedgerCheck(bool(abs(actual - expected) <= tol), float(expected), float(actual))


@dataclass
class World:
    config: RunConfig
    topology: Topology
    population: Population
    blacklist: BlacklistRegistry
    center: WelfareCenter
    policy: WelfarePolicy
    bparams: game.BetrayalParams
    order_rng: np.random.Generator
    project_rng: np.random.Generator
    tick: int = 0
    project_seq: int = 0
    topology_seed: int = 0
    topology_rejections: list[int] = field(default_factory=list)

    def total_wealth(self) -> float:
        return math.fsum(self.population.wealth) + self.center.wealth

    def summary(self) -> dict:
        reg = self.blacklist
        pop = self.population
        return {
            "tick": self.tick,
            "total_agent_wealth": math.fsum(pop.wealth),
            "center_wealth": self.center.wealth,
            "rates": list(self.policy.schedule.rates),
            "min_guarantee": self.policy.min_guarantee,
            "blacklist": {str(k): v for k, v in sorted(reg.entries.items())},
            "agents": [pop.snapshot(i, i in reg) for i in range(len(pop))],
        }


def build_world(config: RunConfig) -> World:
    config.validate()
    ss_topo, ss_init, ss_order, ss_proj = np.random.SeedSequence(config.seed).spawn(4)
    net = config.network
    topo_draws = np.random.default_rng(ss_topo)
    rejected = []
    for _ in range(MAX_TOPOLOGY_ATTEMPTS):
        tseed = int(topo_draws.integers(0, 2**63))
        topo = generate_small_world(SmallWorldParams(n=net.n, k=net.k, p=net.p, seed=tseed))
        if is_connected(topo):
            break
        log.info("topology seed %d produced a disconnected graph; regenerating", tseed)
        rejected.append(tseed)
    else:
        raise SimulationError(0, RuntimeError("could not generate a connected topology"))

    init = np.random.default_rng(ss_init)
    ac = config.agents
    wealth = init.uniform(ac.wealth_min, ac.wealth_max, size=net.n)
    spirit = init.integers(ac.spirit_min, ac.spirit_max + 1, size=net.n).astype(float)
    pop = Population(wealth, spirit, ContactBook.from_adjacency(topo.adjacency))

    w = config.welfare
    schedule = TaxSchedule.from_pairs(config.tax.brackets, config.tax.exemption_threshold)
    controller = ControllerState(
        rate_step=w.rate_step,
        min_step=w.min_step_fraction * w.min_guarantee,
        rate_bounds=(w.rate_bounds[0], w.rate_bounds[1]),
        min_bounds=(w.min_bounds_factor[0] * w.min_guarantee, w.min_bounds_factor[1] * w.min_guarantee),
        surplus_window=w.surplus_window,
    )
    policy = WelfarePolicy(schedule, w.min_guarantee, w.aver, tuple(w.issuance_rates), controller)
    center = WelfareCenter(w.center_initial_fraction * math.fsum(wealth))
    g = config.game
    bparams = game.BetrayalParams(g.gamma, g.beta, g.theta, g.k, g.first_condition)
    return World(
        config=config,
        topology=topo,
        population=pop,
        blacklist=BlacklistRegistry(),
        center=center,
        policy=policy,
        bparams=bparams,
        order_rng=np.random.default_rng(ss_order),
        project_rng=np.random.default_rng(ss_proj),
        topology_seed=tseed,
        topology_rejections=rejected,
    )


class _TickCounters:
    __slots__ = ("betrayals", "attempted", "succeeded", "issued", "accepted")

    def __init__(self) -> None:
        self.betrayals = self.attempted = self.succeeded = self.issued = self.accepted = 0


def _stakes(wealth: np.ndarray, spirit: np.ndarray, aver: float, g) -> np.ndarray:
    mu = np.minimum(wealth * (spirit / 100.0) * g.invest_fraction, g.stake_cap_ticks * aver)
    room = wealth - g.reserve_ticks * aver
    return np.where((room > 0.0) & (mu > 0.0), np.minimum(mu, room), 0.0)


def _run_project(world: World, sponsor: int, blocked: np.ndarray, cnt: _TickCounters, led: TickLedger, events: list | None) -> None:
    g = world.config.game
    rng = world.project_rng
    pop = world.population
    W, S = pop.wealth, pop.spirit
    pol = world.policy
    sched = pol.schedule
    aver = pol.aver

    mu_s = game.decide_stake(
        float(W[sponsor]), float(S[sponsor]), aver, g.invest_fraction, g.reserve_ticks, g.stake_cap_ticks * aver
    )
    if mu_s <= 0.0:
        return
    omega1 = rng.uniform(-10.0, 10.0)
    omega2 = rng.uniform(0.0, 100.0)
    omega3 = int(rng.integers(0, g.omega3_max + 1))

    invitees = eligible_invitees_array(sponsor, pop, blocked, g.white_fraction, rng)
    ids = None
    if invitees.size:
        cnt.issued += int(invitees.size)
        risk = game.project_risk([float(S[sponsor])] + S[invitees].tolist(), False, omega1=omega1)
        gain, loss = game.project_payoff_ratios(risk, omega2=omega2, omega3=omega3)
        mu = _stakes(W[invitees], S[invitees], aver, g)
        take = (mu > 0.0) & (game.profit_for_array(mu, risk, gain, loss, sched) > 0.0)
        if take.any():
            cnt.accepted += int(np.count_nonzero(take))
            ids = np.concatenate([[sponsor], invitees[take]])
            stakes = np.concatenate([[mu_s], mu[take]])

    if ids is not None:
        solo = False
        risk = game.project_risk(S[ids].tolist(), False, omega1=omega1)
        gain, loss = game.project_payoff_ratios(risk, omega2=omega2, omega3=omega3)
    else:
        solo = True
        risk = game.project_risk([float(S[sponsor])], True, solo_penalty=g.solo_penalty, omega1=omega1)
        gain, loss = game.project_payoff_ratios(risk, omega2=omega2, omega3=omega3)
        if game.profit_for(mu_s, risk, gain, loss, sched) <= 0.0:
            return
        ids = np.array([sponsor])
        stakes = np.array([mu_s])

    committed = W[ids] - stakes
    W[ids] = committed
    total = math.fsum(stakes.tolist()) if stakes.size > 1 else float(stakes[0])
    cnt.attempted += 1

    traitor_mask = None
    if not solo:
        pos = rng.permutation(ids.size) if g.sponsor_can_betray else 1 + rng.permutation(ids.size - 1)
        picked = game.select_coalition_array(pos, committed[pos], stakes[pos], total, world.bparams, aver, pol.min_guarantee)
        if picked.size:
            traitor_mask = np.zeros(ids.size, dtype=bool)
            traitor_mask[picked] = True

    if traitor_mask is not None:
        kind = game.BETRAYAL
    else:
        kind = game.SUCCESS if rng.uniform(0.0, 100.0) > risk else game.FAILURE

    credit, tax = game.settle_array(stakes, kind, traitor_mask, gain, loss, sched)
    W[ids] = committed + (credit - tax)
    if kind == game.SUCCESS:
        taxed = math.fsum(tax.tolist())
        world.center.wealth += taxed
        led.taxes += taxed
        led.gains += total * gain
        cnt.succeeded += 1
    elif kind == game.FAILURE:
        led.losses += total * loss
    else:
        led.betrayal_transfer += total
        cnt.betrayals += 1
        for a in ids[traitor_mask].tolist():
            world.blacklist.add(a, world.tick, world.bparams.k)
            blocked[a] = True

    if not solo:
        pop.contacts.record(ids, kind == game.SUCCESS)

    world.project_seq += 1
    if events is not None:
        traitors = sorted(ids[traitor_mask].tolist()) if traitor_mask is not None else []
        events.append({
            "tick": world.tick,
            "project": world.project_seq,
            "sponsor": sponsor,
            "solo": int(solo),
            "participants": ";".join(str(a) for a in ids.tolist()),
            "stakes": ";".join(repr(m) for m in stakes.tolist()),
            "risk": repr(float(risk)),
            "gain_ratio": repr(float(gain)),
            "loss_ratio": repr(float(loss)),
            "outcome": kind,
            "traitors": ";".join(str(a) for a in traitors),
        })


def step(world: World, events: list | None = None) -> tuple[MetricsRecord, TickLedger]:
    """Advance one tick; appends project events to ``events`` when given."""
    cfg = world.config
    pop = world.population
    W = pop.wealth
    n = len(pop)
    pol = world.policy
    reg = world.blacklist
    cnt = _TickCounters()
    led = TickLedger()

    reg.purge(world.tick)
    blocked = reg.mask(n)

    orng = world.order_rng
    order = orng.permutation(n)
    # one coin per agent drawn up front; blacklisting during the tick is checked at visit time
    sponsors = order[orng.random(n) < cfg.game.sponsor_probability]
    for aid in sponsors.tolist():
        if blocked[aid]:
            continue
        _run_project(world, aid, blocked, cnt, led, events)

    aver = pol.aver
    W -= aver
    led.consumption = aver * n

    due = subsidy_array(W, pol)
    owed = math.fsum(due)
    if owed > 0.0:
        treasury = world.center.wealth
        scale = 1.0 if treasury >= owed else max(treasury, 0.0) / owed
        pay = due * scale
        W += pay
        paid = math.fsum(pay)
        world.center.wealth -= paid
        led.subsidies = paid

    if cfg.welfare.controller_enabled:
        projected = math.fsum(subsidy_array(W, pol))
        action = policy_step(pol, world.center, projected)
    else:
        action = "frozen"

    m = pol.min_guarantee
    rec = MetricsRecord(
        tick=world.tick,
        betrayal_count=cnt.betrayals,
        projects_attempted=cnt.attempted,
        projects_succeeded=cnt.succeeded,
        invitations_issued=cnt.issued,
        invitations_accepted=cnt.accepted,
        total_agent_wealth=math.fsum(W),
        center_wealth=world.center.wealth,
        current_rate=pol.schedule.top_rate,
        current_min_guarantee=m,
        blacklist_size=len(reg),
        poor_count=int(np.count_nonzero(poor_mask(W, m))),
        betrayal_rate=cnt.betrayals / cnt.attempted if cnt.attempted else 0.0,
        acceptance_rate=cnt.accepted / cnt.issued if cnt.issued else 0.0,
        gains=led.gains,
        losses=led.losses,
        consumption=led.consumption,
        taxes=led.taxes,
        subsidies=led.subsidies,
        controller_action=action,
    )
    world.tick += 1
    return rec, led


@dataclass
class RunResult:
    metrics: list[MetricsRecord]
    events: list[dict]
    summary: dict
    ledger_failures: list[tuple[int, str]] = field(default_factory=list)


def iter_run(world: World, check_ledger: bool = True, events: list | None = None) -> Iterator[tuple[MetricsRecord, TickLedger, LedgerCheck | None]]:
    for _ in range(world.config.ticks):
        before = world.total_wealth() if check_ledger else 0.0
        try:
            rec, led = step(world, events)
        except Exception as exc:  # surface the tick that failed
            raise SimulationError(world.tick, exc) from exc
        chk = ledger_check(before, world.total_wealth(), led) if check_ledger else None
        yield rec, led, chk


def run(
    config: RunConfig,
    record_events: bool = True,
    check_ledger: bool = True,
    on_tick: Callable[[MetricsRecord], None] | None = None,
) -> RunResult:
    t0 = time.perf_counter()
    world = build_world(config)
    initial = world.summary()
    events: list[dict] | None = [] if record_events else None
    metrics: list[MetricsRecord] = []
    failures: list[tuple[int, str]] = []
    for rec, _, chk in iter_run(world, check_ledger, events):
        metrics.append(rec)
        if chk is not None and not chk:
            failures.append((rec.tick, chk.report()))
        if on_tick is not None:
            on_tick(rec)
    summary = {
        "schema_version": config.schema_version,
        "config": config.to_dict(),
        "controller": "adaptive" if config.welfare.controller_enabled else "frozen",
        "node_indexing": "0-based",
        "seed_derivation": "SeedSequence(seed).spawn(4) -> topology, agent init, visit order, project draws",
        "topology": {
            "seed": world.topology_seed,
            "rejected_seeds": world.topology_rejections,
            "edges": world.topology.edge_count,
        },
        "ticks_run": len(metrics),
        "totals": _totals(metrics),
        "ledger_failures": len(failures),
        "initial": initial,
        "final": world.summary(),
        "wall_clock_seconds": time.perf_counter() - t0,
    }
    return RunResult(metrics, events or [], summary, failures)


def _totals(metrics: list[MetricsRecord]) -> dict:
    att = sum(r.projects_attempted for r in metrics)
    bet = sum(r.betrayal_count for r in metrics)
    iss = sum(r.invitations_issued for r in metrics)
    acc = sum(r.invitations_accepted for r in metrics)
    return {
        "projects_attempted": att,
        "projects_succeeded": sum(r.projects_succeeded for r in metrics),
        "betrayals": bet,
        "invitations_issued": iss,
        "invitations_accepted": acc,
        "betrayal_rate": bet / att if att else 0.0,
        "acceptance_rate": acc / iss if iss else 0.0,
    }


def metrics_row(rec: MetricsRecord) -> dict:
    row = asdict(rec)
    for k, v in row.items():
        if isinstance(v, (float, np.floating)):
            row[k] = repr(float(v))
    return row
