"""DC SCOPF: LP vs dispatch-grid oracle, slack behaviour, LODF checks,
and the outage planner vs an exhaustive window scan."""

import itertools

import numpy as np
import pytest

from gridchat.model import Bus, Generator, Line, MaintenanceCalendar, Network, NetworkError
from gridchat.scopf import (
    OutageRequest,
    ScopfProblem,
    evaluate_window,
    feasibility_map,
    lodf_matrix,
    plan_outage,
    ptdf_matrix,
    solve_scopf,
    SLACK_ZERO_TOL,
)


def dispatch_net(loads, gens, ratings=None):
    """Small meshed 3-bus network: 0-1, 1-2, 0-2."""
    ratings = ratings or [5.0, 5.0, 5.0]
    buses = tuple(
        Bus(i, "slack" if i == 0 else "pq", p_load=loads[i]) for i in range(3)
    )
    lines = tuple(
        Line(k, f, t, r=0.0, x=0.1, rating=ratings[k])
        for k, (f, t) in enumerate([(0, 1), (1, 2), (0, 2)])
    )
    return Network(base_mva=100, buses=buses, lines=lines, generators=tuple(gens))


def brute_force_objective(net, contingencies, penalty, step=0.01):
    """Exhaustive dispatch-grid minimum of cost + penalty * violations."""
    gens = net.generators
    loads, _ = net.base_loads()
    demand = loads.sum()
    ptdf = ptdf_matrix(net)
    lodf = lodf_matrix(net, ptdf)
    cont = [next(k for k, ln in enumerate(net.lines) if ln.id == c)
            for c in contingencies]
    A = np.column_stack([ptdf[:, net.bus_index(g.bus)] for g in gens])
    c_f = -ptdf @ loads
    ratings = np.array([ln.rating for ln in net.lines])

    axes = [np.arange(g.p_min, g.p_max + step / 2, step) for g in gens]
    best = np.inf
    for point in itertools.product(*axes):
        p = np.array(point)
        flows = A @ p + c_f
        viol = abs(p.sum() - demand)
        viol += np.maximum(np.abs(flows) - ratings, 0.0).sum()
        for c in cont:
            post = flows + lodf[:, c] * flows[c]
            post[c] = 0.0
            r = ratings.copy()
            viol += np.maximum(np.abs(np.delete(post, c)) - np.delete(r, c), 0.0).sum()
        obj = sum(g.cost * pi for g, pi in zip(gens, p)) + penalty * viol
        best = min(best, obj)
    return best


class TestSolveScopf:
    def test_balance_only(self):
        net = dispatch_net([0.0, 0.5, 0.5],
                           [Generator(0, 0, 0.0, 2.0, cost=10.0)])
        sol = solve_scopf(ScopfProblem(net, 0, np.array([1]), (), loads=np.array([0, 0.5, 0.5])))
        assert sol.feasible
        assert sol.dispatch[0] == pytest.approx(1.0, abs=1e-8)
        assert sol.objective == pytest.approx(10.0, abs=1e-6)

    def test_sole_generator_unavailable(self):
        net = dispatch_net([0.0, 0.5, 0.5],
                           [Generator(0, 0, 0.0, 2.0, cost=10.0)])
        sol = solve_scopf(ScopfProblem(net, 0, np.array([0]), (), loads=np.array([0, 0.5, 0.5])))
        assert sol.status == "optimal" and not sol.feasible
        assert sol.slack_norm == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("loads,gens,ratings", [
        # cheap unit capacity-bound, expensive covers the rest
        ([0.0, 0.7, 0.8], [Generator(0, 0, 0.0, 0.8, 10.0),
                           Generator(1, 2, 0.0, 1.0, 20.0)], None),
        # line limit forces the cheap remote unit partially off
        ([0.0, 1.0, 0.5], [Generator(0, 0, 0.0, 2.0, 10.0),
                           Generator(1, 2, 0.0, 2.0, 20.0)], [0.5, 0.5, 0.5]),
        # infeasible: caps below demand, slack absorbs the gap
        ([0.0, 1.0, 1.0], [Generator(0, 0, 0.0, 0.8, 10.0),
                           Generator(1, 2, 0.0, 1.0, 20.0)], None),
    ])
    def test_matches_dispatch_grid_oracle(self, loads, gens, ratings):
        net = dispatch_net(loads, gens, ratings)
        problem = ScopfProblem(net, 0, np.ones(len(gens)), (1,),
                               loads=np.array(loads))
        sol = solve_scopf(problem)
        oracle = brute_force_objective(net, (1,), problem.penalty)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(oracle, abs=1e-3)

    def test_dispatch_within_availability_bounds(self, grid, calendar, contingencies):
        sol = solve_scopf(ScopfProblem(
            grid, 30, calendar.availability[:, 30], contingencies))
        for j, g in enumerate(grid.generators):
            tau = calendar.availability[j, 30]
            assert tau * g.p_min - 1e-9 <= sol.dispatch[j] <= tau * g.p_max + 1e-9

    def test_slack_completeness_random_availability(self, grid, contingencies):
        """Every availability pattern yields a solvable LP."""
        rng = np.random.default_rng(3)
        for _ in range(20):
            tau = rng.integers(0, 2, size=len(grid.generators))
            sol = solve_scopf(ScopfProblem(grid, 10, tau, contingencies))
            assert sol.status == "optimal"
            assert (sol.slack >= 0).all()

    def test_lambda_insensitive_feasibility(self, grid, calendar, contingencies):
        for day in (0, 20, 28, 35, 55):
            tau = calendar.availability[:, day].copy()
            tau[1] = 0  # asset 1 also out; infeasible where it overlaps asset 0
            verdicts = []
            for lam in (1e5, 1e6, 1e7):
                sol = solve_scopf(ScopfProblem(grid, day, tau, contingencies,
                                               penalty=lam))
                verdicts.append(sol.feasible)
            assert len(set(verdicts)) == 1

    def test_penalty_must_dominate_costs(self, grid, contingencies):
        with pytest.raises(ValueError, match="penalty"):
            ScopfProblem(grid, 0, np.ones(4), contingencies, penalty=10.0)

    def test_unknown_contingency_rejected(self, grid):
        with pytest.raises(NetworkError, match="does not exist"):
            ScopfProblem(grid, 0, np.ones(4), (99,))

    def test_islanding_contingency_rejected(self):
        net = dispatch_net([0.0, 0.5, 0.5], [Generator(0, 0, 0.0, 2.0, 10.0)])
        # removing line 1 of a radial variant would island bus 2
        radial = Network(
            base_mva=100,
            buses=net.buses,
            lines=(Line(0, 0, 1, 0.0, 0.1, rating=5.0),
                   Line(1, 1, 2, 0.0, 0.1, rating=5.0)),
            generators=net.generators,
        )
        with pytest.raises(NetworkError, match="island"):
            ScopfProblem(radial, 0, np.ones(1), (1,), loads=np.array([0, 0.5, 0.5]))


class TestLodf:
    def test_lodf_matches_reduced_network_ptdf(self, grid):
        """Post-contingency flows via LODF equal a re-solved network."""
        ptdf = ptdf_matrix(grid)
        lodf = lodf_matrix(grid, ptdf)
        rng = np.random.default_rng(0)
        inj = rng.normal(0, 0.5, grid.n_bus)
        slack = next(i for i, b in enumerate(grid.buses) if b.kind == "slack")
        inj[slack] -= inj.sum()
        flows = ptdf @ inj
        out = 9  # a chord whose removal keeps the ring connected
        pos = next(k for k, ln in enumerate(grid.lines) if ln.id == out)
        reduced = Network(
            base_mva=grid.base_mva, buses=grid.buses,
            lines=tuple(ln for ln in grid.lines if ln.id != out),
            generators=grid.generators,
        )
        direct = ptdf_matrix(reduced) @ inj
        via_lodf = np.delete(flows + lodf[:, pos] * flows[pos], pos)
        assert np.allclose(via_lodf, direct, atol=1e-9)


def oracle_plan(net, calendar, request, contingencies):
    """Independent re-implementation of the planner's decision rule."""
    gen_pos = net.generator_index(request.asset)

    def window_ok(t0):
        cal = calendar.with_outage(gen_pos, range(t0, t0 + request.duration_days))
        for day in range(t0, t0 + request.duration_days):
            sol = solve_scopf(ScopfProblem(
                net, day, cal.availability[:, day], contingencies))
            if sol.status != "optimal" or sol.slack_norm > SLACK_ZERO_TOL:
                return False
        return True

    if window_ok(request.start_day):
        return ("possible", None)
    for t0 in range(request.start_day - 1, -1, -1):
        if window_ok(t0):
            return ("alternative", t0)
    return ("impossible", None)


class TestPlanner:
    def test_empty_calendar_possible(self, grid, contingencies):
        cal = MaintenanceCalendar(np.ones((4, 56), dtype=np.int8), 56)
        result = plan_outage(grid, cal, OutageRequest(10, 5, 1), contingencies)
        assert result.verdict == "possible"
        assert result.message == "requested outage plan is possible."

    def test_conflicting_window_gets_alternative(self, grid, calendar, contingencies):
        result = plan_outage(grid, calendar, OutageRequest(30, 7, 1), contingencies)
        assert result.verdict == "alternative"
        assert result.alternative_start == 20
        assert result.message == (
            "requested outage plan is not possible, "
            "but starting at 20 is possible."
        )

    def test_verdicts_match_oracle(self, grid, calendar, contingencies):
        for start, days in [(0, 2), (25, 3), (27, 1), (30, 4), (44, 3), (50, 2)]:
            result = plan_outage(grid, calendar,
                                 OutageRequest(start, days, 1), contingencies)
            verdict, alt = oracle_plan(grid, calendar,
                                       OutageRequest(start, days, 1), contingencies)
            assert (result.verdict, result.alternative_start) == (verdict, alt)

    def test_scan_later_finds_forward_window(self, grid, contingencies):
        a = np.ones((4, 56), dtype=np.int8)
        a[0, :21] = 0  # asset 0 out early: no earlier start can work
        cal = MaintenanceCalendar(a, 56)
        request = OutageRequest(5, 7, 1)
        assert plan_outage(grid, cal, request, contingencies).verdict == "impossible"
        later = plan_outage(grid, cal, request, contingencies, scan_later=True)
        assert later.verdict == "alternative"
        assert later.alternative_start == 21
        assert later.message.endswith("starting at 21 is possible.")

    def test_exhausted_scan_is_impossible(self, grid, calendar, contingencies):
        # a 30-day window from any start overlaps the asset-0 maintenance
        result = plan_outage(grid, calendar, OutageRequest(24, 30, 1),
                             contingencies)
        assert result.verdict == "impossible"
        assert result.message == "requested outage plan is not possible."

    def test_requested_window_not_left_blocked(self, grid, calendar, contingencies):
        """Scanning must probe each candidate on a fresh calendar."""
        request = OutageRequest(30, 7, 1)
        result = plan_outage(grid, calendar, request, contingencies)
        alt = result.alternative_start
        # the alternative must be genuinely feasible on the original calendar
        norms = evaluate_window(grid, calendar, grid.generator_index(1),
                                alt, 7, contingencies)
        assert all(v <= SLACK_ZERO_TOL for v in norms.values())

    def test_window_beyond_horizon_rejected(self, grid, calendar, contingencies):
        with pytest.raises(ValueError, match="horizon"):
            plan_outage(grid, calendar, OutageRequest(55, 5, 1), contingencies)

    def test_unknown_asset_rejected(self, grid, calendar, contingencies):
        with pytest.raises(NetworkError, match="unknown generator"):
            plan_outage(grid, calendar, OutageRequest(0, 2, 77), contingencies)


class TestFeasibilityMap:
    def test_empty_calendar_all_true(self, grid, contingencies):
        cal = MaintenanceCalendar(np.ones((4, 56), dtype=np.int8), 56)
        vec = feasibility_map(grid, cal, 1, 7, contingencies)
        assert vec.all()

    def test_conflict_region_false(self, grid, calendar, contingencies):
        vec = feasibility_map(grid, calendar, 1, 7, contingencies)
        # asset 0 is out on days 27-45; any 7-day window of asset 1
        # overlapping those days is infeasible
        for start in range(len(vec)):
            overlaps = start + 7 > 27 and start <= 45
            assert bool(vec[start]) == (not overlaps)

    def test_duration_equals_horizon(self, grid, contingencies):
        cal = MaintenanceCalendar(np.ones((4, 56), dtype=np.int8), 56)
        vec = feasibility_map(grid, cal, 3, 56, contingencies)
        assert vec.shape == (1,)
