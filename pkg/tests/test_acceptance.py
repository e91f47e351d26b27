"""Acceptance gate: one test per release criterion, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -s`` to see the criterion lines.
Every test enforces its own runtime budget.
"""

import functools
import itertools
import sys
import time

import numpy as np
import pytest
from scipy import stats

from gridchat import kernels
from gridchat.acpf import (
    ConnectionRequest,
    SecurityLimits,
    build_ybus,
    check_connection,
    security_label,
    solve_ac,
)
from gridchat.fixtures import (
    GRID9G_CONTINGENCIES,
    ev_preferences_eps05,
    FEEDER12_WEAK_BUS,
)
from gridchat.harness import (
    MutationSpec,
    RateLimitExceeded,
    calibrated_mv_runner,
    inject_typos_detailed,
    levenshtein,
    privacy_probe,
    sweep as harness_sweep,
)
from gridchat.model import Bus, Line, Network, apply_load_step
from gridchat.orchestrator import (
    BackendDecision,
    ChatContext,
    NoiseSpec,
    Orchestrator,
    ScriptedBackend,
)
from gridchat.residential import (
    EV_ADMISSION_KW,
    HourlyProfile,
    heterogeneity_sweep,
    maximise_ev_admission,
)
from gridchat.scopf import (
    OutageRequest,
    ScopfProblem,
    feasibility_map,
    plan_outage,
    solve_scopf,
    SLACK_ZERO_TOL,
)
from gridchat.tools import default_setup


def criterion(name, budget_s):
    """Print exactly one PASS/FAIL line per criterion and enforce runtime."""
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            t0 = time.perf_counter()
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"[FAIL] {name}", file=sys.stderr, flush=True)
                raise
            elapsed = time.perf_counter() - t0
            if elapsed >= budget_s:
                print(f"[FAIL] {name} (runtime {elapsed:.1f}s over budget "
                      f"{budget_s}s)", file=sys.stderr, flush=True)
                pytest.fail(f"{name}: runtime {elapsed:.2f}s exceeds {budget_s}s")
            print(f"[PASS] {name} ({elapsed:.2f}s)", file=sys.stderr, flush=True)
        return wrapper
    return deco


@criterion("EV admission baseline", 1.0)
def test_ev_admission_baseline(duck):
    base = HourlyProfile(tuple(duck))
    prefs = {u: (17, 18) for u in range(15)}
    admitted, count = maximise_ev_admission(base, prefs, ev_power=EV_ADMISSION_KW,
                                            cap=12.0)
    assert count == 1
    loaded = np.array(duck)
    for u in admitted:
        for t in prefs[u]:
            loaded[t] += EV_ADMISSION_KW
    assert abs(loaded[17] - 10.128) < 1e-3
    assert abs(loaded[18] - 11.334) < 1e-3


@criterion("Heterogeneity gain", 30.0)
def test_heterogeneity_gain(duck):
    base = HourlyProfile(tuple(duck))
    prefs = ev_preferences_eps05()
    _, count = maximise_ev_admission(base, prefs)
    assert count == 7

    # exhaustive 2^15 enumeration on the recorded fixture
    users = sorted(prefs)
    base_arr = np.array(duck)
    best = 0
    for mask in range(1 << len(users)):
        load = base_arr.copy()
        for i, u in enumerate(users):
            if mask >> i & 1:
                for t in prefs[u]:
                    load[t] += EV_ADMISSION_KW
        if (load <= 12.0 + 1e-9).all():
            best = max(best, bin(mask).count("1"))
    assert best == 7

    grid = [round(0.1 * i, 1) for i in range(11)]
    rows = heterogeneity_sweep(grid, repeats=10, seed=7, base=base)
    means = [r["mean_admitted"] for r in rows]
    assert 8.0 <= means[-1] <= 12.0
    rho, _ = stats.spearmanr(grid, means)
    assert rho >= 0.8


@criterion("Power-flow correctness", 5.0)
def test_power_flow_correctness(feeder, limits):
    # closed-form 2-bus case
    p, x = 0.5, 0.1
    net2 = Network(base_mva=100,
                   buses=(Bus(0, "slack", 1.0), Bus(1, "pq", p_load=p)),
                   lines=(Line(0, 0, 1, r=0.0, x=x, rating=1.0),))
    sol2 = solve_ac(net2)
    v2_exact = np.sqrt((1 + np.sqrt(1 - 4 * x**2 * p**2)) / 2)
    assert sol2.converged and abs(sol2.v_magnitudes[1] - v2_exact) < 1e-6

    # base case: secure every hour, injections reproduced <= 1e-8 pu
    Y = build_ybus(feeder)
    for step in range(feeder.horizon):
        p_spec, q_spec = apply_load_step(feeder, step)
        sol = solve_ac(feeder, (p_spec, q_spec))
        assert sol.converged
        s, _ = security_label(sol, feeder, limits)
        assert s == 1
        P, Q = kernels.bus_injections(
            np.ascontiguousarray(Y.real), np.ascontiguousarray(Y.imag),
            sol.v_magnitudes, sol.v_angles,
        )
        assert np.max(np.abs(P[1:] + p_spec[1:])) <= 1e-8
        assert np.max(np.abs(Q[1:] + q_spec[1:])) <= 1e-8

    # +2 MW at the weak bus: infeasible exactly at hour 19
    request = ConnectionRequest(bus=FEEDER12_WEAK_BUS, profile_mw=(2.0,) * 24)
    verdict = check_connection(feeder, request, limits)
    assert verdict.infeasible_steps == (19,)

    # per-hour oracle: label every hour directly
    oracle_bad = []
    extra = 2.0 / feeder.base_mva
    tan_phi = np.sqrt(1 - 0.95**2) / 0.95
    for step in range(feeder.horizon):
        p, q = apply_load_step(feeder, step)
        p, q = p.copy(), q.copy()
        p[FEEDER12_WEAK_BUS] += extra
        q[FEEDER12_WEAK_BUS] += extra * tan_phi
        sol = solve_ac(feeder, (p, q))
        s, _ = security_label(sol, feeder, limits)
        if s == 0:
            oracle_bad.append(step)
    assert tuple(oracle_bad) == (19,)


@criterion("SCOPF properties", 60.0)
def test_scopf_properties(grid, calendar, contingencies):
    from gridchat.scopf import lodf_matrix, ptdf_matrix

    # brute force on a 2-generator reduction of grid-9g: fix the two most
    # expensive units to zero availability and grid-search the remaining two
    availability = np.array([1.0, 1.0, 0.0, 0.0])
    lp = solve_scopf(ScopfProblem(network=grid, day=0, availability=availability,
                                  contingencies=contingencies))
    assert lp.status == "optimal"

    p_spec, _ = apply_load_step(grid, 0)
    demand = float(p_spec.sum())
    ptdf = ptdf_matrix(grid)
    lodf = lodf_matrix(grid, ptdf)
    gens = grid.generators
    caps = [g.p_max if availability[i] else 0.0 for i, g in enumerate(gens)]
    costs = np.array([g.cost for g in gens])
    ratings = np.array([ln.rating for ln in grid.lines])
    gen_bus = [grid.bus_index(g.bus) for g in gens]
    line_ids = [ln.id for ln in grid.lines]

    def violations(dispatch):
        inj = -p_spec.copy()
        for i, g in enumerate(dispatch):
            inj[gen_bus[i]] += g
        total = abs(dispatch.sum() - demand)
        flows = ptdf @ inj
        total += np.clip(np.abs(flows) - ratings, 0, None).sum()
        for cid in contingencies:
            k = line_ids.index(cid)
            post = flows + lodf[:, k] * flows[k]
            post = np.delete(post, k)
            total += np.clip(np.abs(post) - np.delete(ratings, k), 0, None).sum()
        return total

    step = 0.01
    best = np.inf
    g0_grid = np.arange(0, caps[0] + step / 2, step)
    g1_grid = np.arange(0, caps[1] + step / 2, step)
    for g0 in g0_grid:
        for g1 in g1_grid:
            d = np.array([g0, g1, 0.0, 0.0])
            obj = costs @ d + 1e6 * violations(d)
            best = min(best, obj)
    assert abs(lp.objective - best) <= 1e-3 * max(1.0, abs(best))

    # feasibility predicate invariant across penalty weights, with an
    # availability pattern that forces nonzero slack
    tight = np.array([0.0, 1.0, 0.0, 0.0])
    verdicts = set()
    for lam in (1e5, 1e6, 1e7):
        sol = solve_scopf(ScopfProblem(network=grid, day=0, availability=tight,
                                       contingencies=contingencies, penalty=lam))
        assert sol.status == "optimal"
        verdicts.add(sol.slack_norm <= SLACK_ZERO_TOL)
    assert verdicts == {False}

    # slack completeness: every availability pattern stays solvable
    rng = np.random.default_rng(0)
    for _ in range(20):
        avail = rng.integers(0, 2, size=len(gens)).astype(float)
        sol = solve_scopf(ScopfProblem(network=grid, day=0, availability=avail,
                                       contingencies=contingencies))
        assert sol.status == "optimal"


@criterion("Outage planner", 120.0)
def test_outage_planner(grid, calendar, contingencies):
    horizon = calendar.horizon_days
    assets = [g.id for g in grid.generators]

    # oracle: a day's feasibility depends only on that day's availability
    # with the asset forced out, so build one day-map per asset directly
    day_ok = {}
    for asset in assets:
        pos = grid.generator_index(asset)
        ok = []
        for day in range(horizon):
            avail = calendar.availability[:, day].astype(float).copy()
            avail[pos] = 0.0
            sol = solve_scopf(ScopfProblem(network=grid, day=day,
                                           availability=avail,
                                           contingencies=contingencies))
            ok.append(sol.status == "optimal"
                      and sol.slack_norm <= SLACK_ZERO_TOL)
        day_ok[asset] = ok

    def oracle(asset, start, dt):
        ok = day_ok[asset]
        window = lambda t0: all(ok[t0:t0 + dt])
        if window(start):
            return "possible", None
        for t0 in range(start - 1, -1, -1):
            if window(t0):
                return "alternative", t0
        return "impossible", None

    checked = 0
    for asset, dt in itertools.product(assets, (1, 2, 3, 4)):
        for start in range(horizon - dt + 1):
            result = plan_outage(
                grid, calendar,
                OutageRequest(start_day=start, duration_days=dt, asset=asset),
                contingencies,
            )
            expected = oracle(asset, start, dt)
            assert (result.verdict, result.alternative_start) == expected, \
                (asset, start, dt)
            checked += 1
    assert checked == len(assets) * sum(horizon - dt + 1 for dt in (1, 2, 3, 4))

    # conversational replay: infeasible request, offered alternative,
    # confirmed alternative window
    asset, dt = 1, 7
    fmap = feasibility_map(grid, calendar, asset, dt, contingencies)
    bad_start = int(np.flatnonzero(~fmap)[0])
    probe = plan_outage(grid, calendar,
                        OutageRequest(start_day=bad_start, duration_days=dt,
                                      asset=asset), contingencies)
    assert probe.verdict == "alternative"
    alt = probe.alternative_start

    registry, personas, _ = default_setup()
    script = [
        BackendDecision.tool_call("OutagePlanner", {
            "asset": asset, "start_day": bad_start, "duration_days": dt}),
        BackendDecision.final_text(
            f"That window is not possible; starting at day {alt} works."),
        BackendDecision.tool_call("OutagePlanner", {
            "asset": asset, "start_day": alt, "duration_days": dt}),
        BackendDecision.final_text(f"Confirmed: outage starts on day {alt}."),
    ]
    orch = Orchestrator(registry, personas, ScriptedBackend(script))
    ctx = ChatContext("fig16", "tso")
    first, _ = orch.step(ctx, f"take generator {asset} out on day {bad_start} "
                              f"for {dt} days")
    assert str(alt) in first
    second, _ = orch.step(ctx, f"fine, start on day {alt} instead")
    assert "Confirmed" in second
    assert [v.feasible for v in ctx.verdicts] == [False, True]
    assert orch.issue_gate(ctx, ctx.verdicts[1].token).granted
    assert not orch.issue_gate(ctx, ctx.verdicts[0].token).granted


@criterion("Gate soundness", 30.0)
def test_gate_soundness():
    registry, personas, _ = default_setup()
    ok_profile = [0.5] * 24
    bad_profile = [2.0] * 24  # infeasible at the weak bus, hour 19
    rng = np.random.default_rng(42)

    sessions = 0
    unsound = 0
    sound_grants = 0
    for i in range(120):
        infeasible_truth = bool(rng.integers(0, 2))
        profile = bad_profile if infeasible_truth else ok_profile
        noise = NoiseSpec(
            drop_param=float(rng.choice([0.0, 1.0], p=[0.6, 0.4])),
            corrupt_number=float(rng.choice([0.0, 1.0], p=[0.6, 0.4])),
            skip_tool=float(rng.choice([0.0, 1.0], p=[0.7, 0.3])),
            seed=i,
        )
        script = [
            BackendDecision.tool_call("MVContractPlanner",
                                      {"zip": 11, "profile": list(profile)}),
            BackendDecision.final_text(
                "Good news: your connection is feasible and the contract "
                "is confirmed."),
            BackendDecision.final_text("(retrying) everything is feasible!"),
        ]
        orch = Orchestrator(registry, personas, ScriptedBackend(script, noise))
        ctx = ChatContext(f"adv{i}", "dso")
        orch.step(ctx, "connect my site at zip 11, please confirm")
        sessions += 1

        candidates = [v.token for v in ctx.verdicts] + ["f" * 64]
        for token in candidates:
            result = orch.issue_gate(ctx, token)
            if not result.granted:
                continue
            record = next(v for v in ctx.verdicts if v.token == token)
            # independent re-check straight against the kernel
            truth = registry.get("MVContractPlanner").handler(**record.arguments)
            if truth.feasible is not True:
                unsound += 1
            else:
                sound_grants += 1

    assert sessions >= 100
    assert unsound == 0
    assert sound_grants > 0  # the gate is not vacuously refusing everything


@criterion("Harness self-validation", 120.0)
def test_harness_self_validation():
    text = ("Please connect my new production site at zip code 7 with a peak "
            "load of 2 MW between 18:00 and 21:00 on working days.")
    target = round(3.0 * len(text) / 100)
    devs = []
    for seed in range(1000):
        _, applied = inject_typos_detailed(text, MutationSpec(3.0, seed=seed))
        devs.append(abs(applied - target) * 100.0 / len(text))
    assert np.mean(devs) < 0.5

    # Levenshtein vs the textbook recursion: exhaustive over a binary
    # alphabet up to length 4, plus random pairs up to length 8
    from functools import lru_cache

    def recursive(a, b):
        @lru_cache(maxsize=None)
        def d(i, j):
            if i == 0 or j == 0:
                return i + j
            return min(d(i - 1, j) + 1, d(i, j - 1) + 1,
                       d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))
        return d(len(a), len(b))

    words = [""]
    for length in range(1, 5):
        words += ["".join(w) for w in itertools.product("ab", repeat=length)]
    for a, b in itertools.product(words, repeat=2):
        assert levenshtein(a, b) == recursive(a, b)
    rng = np.random.default_rng(1)
    alphabet = list("abcdefgh 0123")
    for _ in range(500):
        a = "".join(rng.choice(alphabet, size=rng.integers(0, 9)))
        b = "".join(rng.choice(alphabet, size=rng.integers(0, 9)))
        assert levenshtein(a, b) == recursive(a, b)

    # calibrated failure injection: measured accuracy within 3 sigma of 1-p
    n = 40
    for p in (0.0, 0.2, 0.5):
        rows = harness_sweep([{"failure_p": p}], n,
                             calibrated_mv_runner(p, seed=123))
        sigma = np.sqrt(p * (1 - p) / n)
        for key in ("g_accuracy", "f_accuracy"):
            assert abs(rows[0][key] - (1 - p)) <= 3 * sigma + 1e-12


@criterion("Privacy probe", 60.0)
def test_privacy_probe(grid, calendar, contingencies):
    asset, dt = 1, 7
    direct = feasibility_map(grid, calendar, asset, dt, contingencies)
    n_starts = len(direct)

    def planner(a, start, duration):
        result = plan_outage(
            grid, calendar,
            OutageRequest(start_day=start, duration_days=duration, asset=a),
            contingencies,
        )
        return result.verdict == "possible"

    report = privacy_probe(planner, [asset], dt, n_starts)
    assert report.complete
    assert report.timelines[asset] == tuple(bool(v) for v in direct)

    budget = 10
    limited = privacy_probe(planner, [asset], dt, n_starts, budget=budget)
    assert limited.request_count == budget and not limited.complete

    rate_limit = 5
    calls = {"n": 0}

    def throttled(a, start, duration):
        calls["n"] += 1
        if calls["n"] > rate_limit:
            raise RateLimitExceeded("server rate limit")
        return planner(a, start, duration)

    halted = privacy_probe(throttled, [asset], dt, n_starts)
    assert halted.request_count == rate_limit and not halted.complete
