"""Acceptance checks, one test per criterion, each at its stated tolerance.

Every test records a PASS/FAIL line that is printed in the pytest terminal
summary.  Criteria 3 and 7 are long runs (about half a minute and several
minutes on one core).
"""

import math
import os
import time

import numpy as np
import pytest

from acceptance_report import note, record
from oracles import brute_force_coalition
from welfarenet import game
from welfarenet.config import NetworkConfig, RunConfig
from welfarenet.economy import TaxSchedule, compute_tax, tax_array
from welfarenet.engine import build_world, iter_run, run
from welfarenet.game import BetrayalParams, Project, check_group_betrayal, check_individual_betrayal
from welfarenet.outputs import write_events_csv, write_metrics_csv
from welfarenet.sweep import Axis, SweepSpec, paired_comparison, run_sweep
from welfarenet.topology import SmallWorldParams, average_path_length, clustering_coefficient, generate_small_world

pytestmark = pytest.mark.slow


def acceptance_config(seed: int, ticks: int, **over) -> RunConfig:
    cfg = RunConfig(seed=seed, ticks=ticks, network=NetworkConfig(200, 6, 0.1))
    for path, value in over.items():
        cfg = cfg.replace(path, value)
    return cfg


def test_criterion_1_small_world_regime():
    t0 = time.perf_counter()
    c0s, l0s, c1s, l1s = [], [], [], []
    for seed in range(10):
        g0 = generate_small_world(SmallWorldParams(n=1000, k=10, p=0.0, seed=seed))
        g1 = generate_small_world(SmallWorldParams(n=1000, k=10, p=0.1, seed=seed))
        c0s.append(clustering_coefficient(g0))
        l0s.append(average_path_length(g0))
        c1s.append(clustering_coefficient(g1))
        l1s.append(average_path_length(g1))
    elapsed = time.perf_counter() - t0
    c0, l0, c1, l1 = map(float, map(np.mean, (c0s, l0s, c1s, l1s)))
    c_err = max(abs(c - 2 / 3) for c in c0s)
    ok = c1 / c0 >= 0.6 and l1 / l0 <= 0.3 and c_err <= 1e-12 and elapsed < 30
    record(1, ok, f"C(0)={c0:.12f} (max err {c_err:.1e}), C(0.1)/C(0)={c1 / c0:.3f} >= 0.6, "
                  f"L(0.1)/L(0)={l1 / l0:.3f} <= 0.3, {elapsed:.1f} s < 30 s")
    assert ok


def _slices(income: np.ndarray, lowers: np.ndarray, rates: np.ndarray) -> np.ndarray:
    # marginal slices, no quick deduction involved
    uppers = np.append(lowers[1:], np.inf)
    width = np.clip(income[:, None] - lowers[None, :], 0.0, uppers - lowers)
    return width @ rates


def test_criterion_2_tax_oracle():
    rng = np.random.default_rng(2024)
    worst_eq = worst_gap = 0.0
    checked = 0
    for _ in range(1000):
        m = int(rng.integers(1, 8))
        lowers = np.concatenate([[0.0], np.sort(rng.uniform(1.0, 1e5, m - 1))])
        if np.any(np.diff(lowers) <= 0):
            continue
        rates = rng.uniform(0.0, 1.0, m)
        # the exemption threshold is a deliberate step, so it is left at zero here
        s = TaxSchedule(lowers.tolist(), rates.tolist())
        inc = rng.uniform(0.0, 2e5, 1000)
        inc[:m] = lowers  # hit every boundary exactly as well
        worst_eq = max(worst_eq, float(np.max(np.abs(tax_array(inc, s) - _slices(inc, lowers, rates)))))
        scalar = np.array([compute_tax(float(x), s) for x in inc[:50]])
        worst_eq = max(worst_eq, float(np.max(np.abs(scalar - _slices(inc[:50], lowers, rates)))))
        b = lowers[1:]
        if b.size:
            gap = np.abs(tax_array(b + 1e-6, s) - tax_array(b - 1e-6, s)) - 2e-6 * rates.max()
            worst_gap = max(worst_gap, float(gap.max()))
        checked += 1
    ok = checked >= 990 and worst_eq <= 1e-9 and worst_gap <= 1e-9
    record(2, ok, f"{checked} schedules x 1000 incomes: max |quick - marginal| = {worst_eq:.2e} <= 1e-9; "
                  f"max boundary jump beyond slope = {worst_gap:.2e}")
    assert ok


def test_criterion_3_ledger_identity():
    world = build_world(acceptance_config(seed=11, ticks=2000))
    events: list[dict] = []
    worst = 0.0
    failures = 0
    betrayals = 0
    worst_transfer = 0.0
    for rec, led, chk in iter_run(world, check_ledger=True, events=events):
        worst = max(worst, abs(chk.diff))
        failures += not chk
        for e in events:
            if e["outcome"] == "betrayal":
                betrayals += 1
                stakes = np.array([float(x) for x in e["stakes"].split(";")])
                mask = np.isin([int(x) for x in e["participants"].split(";")], [int(t) for t in e["traitors"].split(";")])
                credit, tax = game.settle_array(stakes, "betrayal", mask, 0.0, 0.0, world.policy.schedule)
                worst_transfer = max(worst_transfer, abs(math.fsum(credit.tolist()) - math.fsum(stakes.tolist())))
                assert not tax.any()
        events.clear()
    ok = failures == 0 and worst <= 1e-6 and betrayals > 0 and worst_transfer <= 1e-9
    record(3, ok, f"2000 ticks x 200 agents: {failures} failing ticks, max |residual| = {worst:.2e} <= 1e-6; "
                  f"{betrayals} betrayals, max net transfer {worst_transfer:.1e}")
    assert ok


def test_criterion_4_betrayal_oracle():
    rng = np.random.default_rng(4)
    p = BetrayalParams(gamma=30.0, beta=3.0, theta=1, k=11)
    aver, min_g = 1.0, 20.0
    mismatches = fired = 0
    for _ in range(500):
        size = int(rng.integers(2, 7))
        ids = np.arange(size)
        wealth = rng.uniform(-10.0, 40.0, size)
        stakes = rng.uniform(0.1, 12.0, size)
        # the same positional shuffle the engine uses
        order = rng.permutation(size)
        got = game.select_coalition_array(ids[order], wealth[order], stakes[order], float(stakes.sum()), p, aver, min_g)
        want = brute_force_coalition(order.tolist(), dict(enumerate(wealth)), dict(enumerate(stakes)),
                                     p.gamma, p.beta, p.theta, p.k, aver, min_g)
        mismatches += frozenset(got.tolist()) != want
        fired += bool(want)
    d1_bad = 0
    for _ in range(100_000):
        w, s = rng.uniform(-50, 100), rng.uniform(0, 50)
        tot = rng.uniform(0, 300)
        q = BetrayalParams(float(rng.uniform(1, 60)), float(rng.uniform(0.5, 8)), int(rng.integers(1, 4)),
                           int(rng.integers(11, 20)), "wealth" if rng.random() < 0.5 else "stake")
        a, m = float(rng.uniform(0, 5)), float(rng.uniform(0, 60))
        d1_bad += check_group_betrayal([(w, s)], tot, q, a, m) != check_individual_betrayal(w, s, tot, q, a, m)
    ok = mismatches == 0 and d1_bad == 0 and fired > 0
    record(4, ok, f"500 projects (<= 6 participants): {mismatches} mismatches vs exhaustive subsets "
                  f"({fired} with a betrayal); d=1 equivalence: {d1_bad} disagreements in 1e5")
    assert ok


def test_criterion_5_blacklist_contract():
    seeds = range(10)
    violations = 0
    reentered = 0
    traitors_total = 0
    for seed in seeds:
        res = run(acceptance_config(seed=100 + seed, ticks=400), check_ledger=False)
        k = res.summary["config"]["game"]["k"]
        expiry: dict[int, int] = {}
        came_back = False
        for e in res.events:
            ids = [int(x) for x in e["participants"].split(";")]
            for a in ids:
                if a in expiry:
                    if e["tick"] < expiry[a]:
                        violations += 1
                    else:
                        came_back = True
            for t in e["traitors"].split(";") if e["traitors"] else []:
                expiry[int(t)] = e["tick"] + k
                traitors_total += 1
        reentered += came_back
    share = reentered / len(seeds)
    ok = violations == 0 and share >= 0.9
    record(5, ok, f"{len(seeds)} seeds x 400 ticks, {traitors_total} blacklistings: {violations} participations "
                  f"inside a blacklist term; post-expiry re-entry in {share:.0%} of seeds (>= 90%)")
    assert ok


def test_criterion_6_determinism(tmp_path):
    digests = []
    for name in ("a", "b"):
        res = run(acceptance_config(seed=6, ticks=300))
        out = tmp_path / name
        out.mkdir()
        write_metrics_csv(out / "metrics.csv", res.metrics)
        write_events_csv(out / "events.csv", res.events)
        digests.append(((out / "metrics.csv").read_bytes(), (out / "events.csv").read_bytes()))
    ok = digests[0] == digests[1]
    size = len(digests[0][1])
    record(6, ok, f"two invocations: metrics CSV {'identical' if digests[0][0] == digests[1][0] else 'DIFFERENT'}, "
                  f"events CSV ({size} bytes) {'identical' if digests[0][1] == digests[1][1] else 'DIFFERENT'}")
    assert ok


def _controller_sweep(out, seeds, **over):
    spec = SweepSpec(
        base=acceptance_config(seed=0, ticks=2000, **over),
        axes=[Axis("welfare.controller_enabled", [True, False])],
        seeds=list(seeds),
        parallelism=os.cpu_count() or 1,
        tail_ticks=1000,
        per_run_outputs="none",
    )
    t0 = time.perf_counter()
    res = run_sweep(spec, out)
    return res, time.perf_counter() - t0


def test_criterion_7_directional_policy_effect(tmp_path):
    res, elapsed = _controller_sweep(tmp_path / "main", range(20))
    assert res.ok, res.failure_report()
    mean_cmp = paired_comparison(res.rows, "welfare.controller_enabled", True, False, "betrayal_rate_mean")
    std_cmp = paired_comparison(res.rows, "welfare.controller_enabled", True, False, "betrayal_rate_std")
    ok = mean_cmp.wins >= 15 and std_cmp.wins >= 15 and elapsed < 600
    detail = "\n".join([
        "criterion 7 report, tail = last 1000 of 2000 ticks, 200 agents, first condition on wealth",
        "[tail mean betrayal rate]", mean_cmp.table("controller", "frozen"),
        "[tail std of betrayal rate]", std_cmp.table("controller", "frozen"),
    ])
    record(7, ok, f"controller lower mean in {mean_cmp.wins}/20 and lower std in {std_cmp.wins}/20 paired seeds "
                  f"(need >= 15 each); sweep wall clock {elapsed:.0f} s on {os.cpu_count()} core(s) (< 600 s)", detail)
    assert ok


def test_criterion_7_supplement_stake_reading(tmp_path):
    """The stake reading of the first betrayal condition, reported but not gated."""
    res, elapsed = _controller_sweep(tmp_path / "stake", range(5), **{"game.first_condition": "stake"})
    assert res.ok, res.failure_report()
    mean_cmp = paired_comparison(res.rows, "welfare.controller_enabled", True, False, "betrayal_rate_mean")
    std_cmp = paired_comparison(res.rows, "welfare.controller_enabled", True, False, "betrayal_rate_std")
    note("\n".join([
        f"criterion 7 supplement (not gated), first condition on stake, 5 paired seeds, {elapsed:.0f} s",
        mean_cmp.table("controller", "frozen"),
        std_cmp.table("controller", "frozen"),
    ]))


def test_criterion_8_monte_carlo_resolution():
    rng = np.random.default_rng(8)
    rows = []
    ok = True
    for risk in (10, 30, 50, 70, 90):
        proj = Project(0, {0: 1.0}, True, float(risk), 0.5, 0.1)
        wins = sum(game.resolve_project(proj, rng).kind == game.SUCCESS for _ in range(100_000))
        freq = wins / 100_000
        expect = (100 - risk) / 100
        ok &= abs(freq - expect) <= 0.01
        rows.append(f"risk {risk}: {freq:.4f} vs {expect:.2f}")
    record(8, ok, "; ".join(rows) + " (tolerance 0.01)")
    assert ok
