"""Acceptance suite: one test per documented guarantee.

Each test ends with a single [acceptance] PASS/FAIL line carrying the
measured numbers (run with `pytest -s` to see the lines for passing tests).
"""

from __future__ import annotations

import math
import time

import numpy as np

import oracles
from aggsim.graph import CommGraph, Role
from aggsim.harness import ScenarioConfig, run_scenario, rows_to_csv
from aggsim.model import (
    LINEAR,
    EventTrace,
    LogCost,
    UnityCost,
    evaluate,
)
from aggsim.offline import offline_lb
from aggsim.online import (
    ThresholdPolicy,
    balance_root,
    run_itc,
    run_net,
    run_thb,
    threshold_full,
    threshold_none,
    threshold_partial,
)
from aggsim.workload import (
    PoissonArrivals,
    SmallEvents,
    WorkloadSpec,
    gen_sigma2,
    gen_thm6_instance,
    gen_trace,
)

_T0 = time.perf_counter()


def report(name: str, ok: bool, detail: str) -> None:
    status = "PASS" if ok else "FAIL"
    print(f"[acceptance] {name}: {status} ({detail})")
    assert ok, f"{name}: {detail}"


def thb_ratio(trace, theta, k, rho):
    sched = run_thb(trace, ThresholdPolicy(theta), k, rho, UnityCost(), LINEAR)
    total = evaluate(sched, trace, k, rho, UnityCost(), LINEAR).total
    return total / offline_lb(trace, k, rho, UnityCost(), LINEAR).value


def itc_ratio(trace, theta, k, rho):
    sched = run_itc(trace, ThresholdPolicy(theta), k, rho, UnityCost(), LINEAR)
    total = evaluate(sched, trace, k, rho, UnityCost(), LINEAR).total
    return total / offline_lb(trace, k, rho, UnityCost(), LINEAR).value


def small_trace(n, m, seed, k=1):
    spec = WorkloadSpec(PoissonArrivals(20.0), SmallEvents(), m, n, seed)
    return gen_trace(spec, ensure_k=k)


def test_criterion_01_single_system_bound_and_tightness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1001)
    worst = 0.0
    for _ in range(200):
        m = int(rng.integers(1, 51))
        tr = small_trace(1, m, int(rng.integers(2**31)))
        worst = max(worst, thb_ratio(tr, 1.0, 1, 0.5))
    two = gen_thm6_instance(1, [1.0])
    tight = thb_ratio(two, 1.0, 1, 0.5)
    elapsed = time.perf_counter() - t0
    ok = worst <= 2.0 + 1e-6 and tight >= 1.45 and elapsed < 5.0
    report(
        "1 single-system guarantee",
        ok,
        f"max ratio {worst:.6f} <= 2, two-event ratio {tight:.4f} >= 1.45, "
        f"{elapsed:.1f}s < 5s",
    )


def test_criterion_02_independent_mode_bound_and_adversarial():
    t0 = time.perf_counter()
    worst_excess = -math.inf
    adv_ratios = {}
    for n in (5, 10, 25):
        theta = threshold_none(n, 1, 1.0, 0.5)
        for rep in range(50):
            tr = small_trace(n, 200, 1002_000 + 100 * n + rep)
            worst_excess = max(
                worst_excess, thb_ratio(tr, theta, 1, 0.5) - (n + 1)
            )
        adv = gen_thm6_instance(n, np.full(n, 1.0 / n))
        adv_ratios[n] = thb_ratio(adv, 1.0 / n, 1, 0.5)
    elapsed = time.perf_counter() - t0
    ok = (
        worst_excess <= 1e-6
        and all(r >= 0.9 * n for n, r in adv_ratios.items())
        and elapsed < 30.0
    )
    report(
        "2 independent-mode guarantee",
        ok,
        f"worst ratio excess over N+1 = {worst_excess:.2e}, adversarial "
        f"ratios {[round(v, 2) for v in adv_ratios.values()]} vs 0.9N, "
        f"{elapsed:.1f}s < 30s",
    )


def test_criterion_03_shared_mode_bound_and_adversarial():
    t0 = time.perf_counter()
    worst_excess = -math.inf
    for n in (5, 10, 25):
        theta = threshold_full(n, 1, 1.0, 0.5)
        bound = balance_root(n, 1, 1.0, 1.0) + 1.0
        for rep in range(50):
            tr = small_trace(n, 200, 1003_000 + 100 * n + rep)
            worst_excess = max(
                worst_excess, itc_ratio(tr, theta, 1, 0.5) - bound
            )
    burst_ratios = {}
    for n in (16, 64):
        tr = gen_sigma2(n)
        burst_ratios[n] = itc_ratio(tr, 1.0 / (2.0 * math.sqrt(n)), 1, 0.5)
    elapsed = time.perf_counter() - t0
    ok = (
        worst_excess <= 1e-6
        and all(r >= math.sqrt(n) / 4.0 for n, r in burst_ratios.items())
        and elapsed < 30.0
    )
    report(
        "3 shared-mode guarantee",
        ok,
        f"worst ratio excess over phi+1 = {worst_excess:.2e}, burst ratios "
        f"{[round(v, 2) for v in burst_ratios.values()]} vs sqrt(N)/4, "
        f"{elapsed:.1f}s < 30s",
    )


def test_criterion_04_graph_mode_continuity():
    rng = np.random.default_rng(1004)
    matches = 0
    for trial in range(20):
        n = int(rng.integers(2, 7))
        tr = small_trace(n, 40, int(rng.integers(2**31)))
        k = int(rng.integers(1, min(n, 2) + 1))
        theta = threshold_full(n, k, 1.0, 0.5)
        pol = ThresholdPolicy(theta)
        full_graph = CommGraph.complete(n)
        no_graph = CommGraph.from_edges(n, [])
        same_itc = run_net(
            tr, pol, k, 0.5, UnityCost(), LINEAR, full_graph
        ) == run_itc(tr, pol, k, 0.5, UnityCost(), LINEAR)
        same_thb = run_net(
            tr, pol, k, 0.5, UnityCost(), LINEAR, no_graph
        ) == run_thb(tr, pol, k, 0.5, UnityCost(), LINEAR)
        matches += same_itc and same_thb
    worst_gap = 0.0
    for n in (2, 5, 10, 25, 100):
        for k in (1, 2):
            for alpha in (1.0, 1.7, 3.0):
                for rho in (0.2, 0.5, 0.8):
                    worst_gap = max(
                        worst_gap,
                        abs(
                            threshold_partial(n, k, alpha, 1.0, rho)
                            - threshold_full(n, k, alpha, rho)
                        ),
                        abs(
                            threshold_partial(n, k, alpha, float(n), rho)
                            - threshold_none(n, k, alpha, rho)
                        ),
                    )
    ok = matches == 20 and worst_gap <= 1e-12
    report(
        "4 graph-mode continuity",
        ok,
        f"{matches}/20 schedule matches at both extremes, worst threshold "
        f"endpoint gap {worst_gap:.2e} <= 1e-12",
    )


def random_small_instance(rng, n_max, m_max, k):
    n = int(rng.integers(k if k > 1 else 1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    times = np.cumsum(rng.uniform(0.1, 3.0, m))
    w = rng.uniform(0.0, 1.0, (m, n))
    w[rng.random((m, n)) < 0.35] = 0.0
    for j in range(m):
        short = k - np.count_nonzero(w[j])
        if short > 0:
            zero_cols = np.flatnonzero(w[j] == 0.0)
            fill = rng.choice(zero_cols, size=short, replace=False)
            w[j, fill] = rng.uniform(0.1, 1.0, short)
    return EventTrace(times, w)


def test_criterion_05_oracle_matches_exhaustive_search():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1005)
    worst = 0.0
    for _ in range(500):
        tr = random_small_instance(rng, n_max=3, m_max=6, k=1)
        rho = float(rng.choice([0.3, 0.5, 0.7]))
        cost = LogCost() if rng.random() < 0.5 else UnityCost()
        dp = offline_lb(tr, 1, rho, cost, LINEAR).value
        bf = oracles.brute_force_offline(tr, 1, rho, cost, LINEAR)
        worst = max(worst, abs(dp - bf))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 10.0
    report(
        "5 oracle exactness",
        ok,
        f"max |dp - brute| = {worst:.2e} <= 1e-9 over 500 instances, "
        f"{elapsed:.1f}s < 10s",
    )


def test_criterion_06_oracle_lower_bounds_every_algorithm():
    rng = np.random.default_rng(1006)
    worst_slack = math.inf
    runs = 0
    for _ in range(500):
        tr = random_small_instance(rng, n_max=5, m_max=8, k=3)
        n = tr.n_systems
        edges = [
            (a, b)
            for a in range(n)
            for b in range(a + 1, n)
            if rng.random() < 0.5
        ]
        roles = [
            Role.FORWARD if rng.random() < 0.4 else Role.WITHHOLD
            for _ in range(n)
        ]
        graph = CommGraph.from_edges(n, edges).with_roles(roles)
        theta = float(np.exp(rng.uniform(np.log(0.05), np.log(2.0))))
        pol = ThresholdPolicy(theta)
        for k in (1, 2, 3):
            lb = offline_lb(tr, k, 0.5, UnityCost(), LINEAR).value
            for alg in ("thb", "itc", "net"):
                if alg == "thb":
                    s = run_thb(tr, pol, k, 0.5, UnityCost(), LINEAR)
                elif alg == "itc":
                    s = run_itc(tr, pol, k, 0.5, UnityCost(), LINEAR)
                else:
                    s = run_net(tr, pol, k, 0.5, UnityCost(), LINEAR, graph)
                total = evaluate(s, tr, k, 0.5, UnityCost(), LINEAR).total
                worst_slack = min(worst_slack, total - lb)
                runs += 1
    ok = worst_slack >= -1e-9 and runs == 500 * 9
    report(
        "6 oracle lower bound",
        ok,
        f"min(alg - oracle) = {worst_slack:.2e} >= -1e-9 over {runs} runs",
    )


def split_boundaries(trace, sched):
    """Event indexes where every earlier observation is already reported."""
    done = np.full((trace.n_systems, trace.n_events), -np.inf)
    for i, reports in enumerate(sched.per_system):
        for rep in reports:
            for j in rep.event_ids:
                done[i, trace.index_of(j)] = rep.time
    latest = np.maximum.accumulate(done.max(axis=0))
    return [
        s
        for s in range(1, trace.n_events)
        if latest[s - 1] < trace.times[s]
    ]


def test_criterion_07_threshold_run_subadditivity():
    rng = np.random.default_rng(1007)
    tested = 0
    worst_slack = math.inf
    attempts = 0
    while tested < 500 and attempts < 3000:
        attempts += 1
        n = int(rng.integers(1, 4))
        m = int(rng.integers(4, 21))
        tr = small_trace(n, m, int(rng.integers(2**31)))
        theta = float(np.exp(rng.uniform(np.log(0.05), np.log(1.5))))
        pol = ThresholdPolicy(theta)
        full = run_thb(tr, pol, 1, 0.5, UnityCost(), LINEAR)
        cuts = split_boundaries(tr, full)
        if not cuts:
            continue
        s = int(rng.choice(cuts))
        left, right = tr.split_at(s)
        cost_full = evaluate(full, tr, 1, 0.5, UnityCost(), LINEAR).total
        cost_parts = sum(
            evaluate(
                run_thb(part, pol, 1, 0.5, UnityCost(), LINEAR),
                part, 1, 0.5, UnityCost(), LINEAR,
            ).total
            for part in (left, right)
        )
        worst_slack = min(worst_slack, cost_parts - cost_full)
        tested += 1
    ok = tested == 500 and worst_slack >= -1e-9
    report(
        "7 split subadditivity",
        ok,
        f"{tested}/500 split tests, min slack {worst_slack:.2e} >= -1e-9",
    )


def mean_ratios(cfg):
    groups = {}
    for row in run_scenario(cfg, workers=1):
        assert row.error is None, row.error
        groups.setdefault((row.n, row.k), []).append(row.ratio)
    return {key: float(np.mean(v)) for key, v in sorted(groups.items())}


def test_criterion_08a_ratio_growth_by_mode():
    slopes = {}
    for mode in ("none", "full"):
        m = mean_ratios(
            ScenarioConfig("SPU", mode, (4, 8, 16, 32), (1,), (0.5,),
                           runs=50, n_events=200, seed=11)
        )
        ns = np.log([key[0] for key in m])
        slopes[mode] = float(np.polyfit(ns, np.log(list(m.values())), 1)[0])
    ok = 0.8 <= slopes["none"] <= 1.2 and slopes["full"] < 0.7
    report(
        "8a growth by mode",
        ok,
        f"independent slope {slopes['none']:.3f} in [0.8, 1.2], "
        f"shared slope {slopes['full']:.3f} < 0.7",
    )


def test_criterion_08b_big_event_shared_ratio_drops_to_one():
    m = mean_ratios(
        ScenarioConfig("BPU", "full", (8, 16, 32, 64), (1,), (0.5,),
                       runs=50, n_events=120, seed=12)
    )
    values = list(m.values())
    ok = all(b < a for a, b in zip(values, values[1:])) and values[-1] <= 1.1
    report(
        "8b big-event shared-mode drop",
        ok,
        f"mean ratios {[round(v, 3) for v in values]} for N=8..64; "
        "expected decreasing toward 1",
    )


def test_criterion_08c_higher_cover_lowers_ratio():
    m = mean_ratios(
        ScenarioConfig("SPU", "none", (12,), (1, 2, 3), (0.5,),
                       runs=50, n_events=200, seed=13)
    )
    values = [m[(12, k)] for k in (1, 2, 3)]
    ok = values[0] > values[1] > values[2]
    report(
        "8c cover requirement vs ratio",
        ok,
        f"mean ratios {[round(v, 3) for v in values]} strictly decreasing "
        "in K",
    )


def test_criterion_08d_independent_set_roles_beat_dominating_set_roles():
    means = {}
    for mode in ("n1", "n2"):
        m = mean_ratios(
            ScenarioConfig("SPU", mode, (100,), (1,), (0.5,),
                           runs=50, n_events=120, seed=14, avg_degree=18.0)
        )
        means[mode] = m[(100, 1)]
    ok = means["n1"] <= means["n2"]
    report(
        "8d role assignment comparison",
        ok,
        f"mean ratio {means['n1']:.4f} (independent-set roles) <= "
        f"{means['n2']:.4f} (dominating-set roles)",
    )


def test_criterion_08e_perturbation_lowers_adversarial_ratio():
    means = {}
    for pct in (0.0, 0.3):
        m = mean_ratios(
            ScenarioConfig("ADV2", "none", (20,), (1,), (0.5,),
                           runs=50, seed=15, perturb_pct=pct)
        )
        means[pct] = m[(20, 1)]
    ok = means[0.3] < means[0.0]
    report(
        "8e perturbed adversarial inputs",
        ok,
        f"mean ratio perturbed {means[0.3]:.3f} < exact {means[0.0]:.3f}",
    )


def test_criterion_09_sweep_determinism():
    cfg = ScenarioConfig("SPU", "none", (5, 10), (1, 2), (0.5,),
                         runs=3, n_events=100, seed=42)
    first = rows_to_csv(run_scenario(cfg, workers=1))
    again = rows_to_csv(run_scenario(cfg, workers=1))
    pooled = rows_to_csv(run_scenario(cfg, workers=2))
    ok = first == again == pooled
    report(
        "9 sweep determinism",
        ok,
        f"repeat identical: {first == again}, worker pool identical: "
        f"{first == pooled}",
    )


def test_total_runtime_budget():
    elapsed = time.perf_counter() - _T0
    ok = elapsed < 600.0
    report("suite runtime", ok, f"{elapsed:.0f}s < 600s")
