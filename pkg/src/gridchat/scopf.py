"""DC security-constrained OPF with slack penalties and the outage planner.

Each daily study is a linear program: minimise generation cost plus a
large penalty on per-constraint slack variables, subject to availability
bounds, system balance, base-case line limits and post-contingency line
limits for the monitored N-1 outages. The slacks keep every LP solvable;
zero total slack means the day is feasible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .model import MaintenanceCalendar, Network, NetworkError, apply_load_step

__all__ = [
    "ScopfProblem",
    "ScopfSolution",
    "OutageRequest",
    "OutagePlanResult",
    "ptdf_matrix",
    "lodf_matrix",
    "solve_scopf",
    "evaluate_window",
    "plan_outage",
    "feasibility_map",
]

DEFAULT_LAMBDA = 1e6
SLACK_ZERO_TOL = 1e-6


@dataclass(frozen=True)
class ScopfProblem:
    network: Network
    day: int
    availability: np.ndarray          # per-generator 0/1 column for this day
    contingencies: tuple[int, ...]    # monitored line ids
    penalty: float = DEFAULT_LAMBDA
    loads: np.ndarray | None = None   # per-bus P_D in pu; default from series

    def __post_init__(self):
        net = self.network
        gamma_cap = max((g.cost for g in net.generators), default=0.0) * sum(
            g.p_max for g in net.generators
        )
        if self.penalty <= gamma_cap:
            raise ValueError(
                f"penalty {self.penalty} must exceed max cost x capacity {gamma_cap}"
            )
        line_ids = {ln.id for ln in net.lines}
        for c in self.contingencies:
            if c not in line_ids:
                raise NetworkError(f"contingency line {c} does not exist")
        if not _connected_without(net, set(self.contingencies)):
            raise NetworkError("removing a monitored line would island the network")


@dataclass(frozen=True)
class ScopfSolution:
    dispatch: np.ndarray       # per-generator P_G in pu
    slack: np.ndarray          # per-constraint slack, >= 0
    objective: float
    status: str                # "optimal" | "solver-failure"

    @property
    def slack_norm(self) -> float:
        return float(np.sum(self.slack)) if self.slack.size else 0.0

    @property
    def feasible(self) -> bool:
        return self.status == "optimal" and self.slack_norm <= SLACK_ZERO_TOL


@dataclass(frozen=True)
class OutageRequest:
    start_day: int
    duration_days: int
    asset: int

    def __post_init__(self):
        if self.start_day < 0:
            raise ValueError("start day must be >= 0")
        if self.duration_days < 1:
            raise ValueError("duration must be >= 1 day")


@dataclass(frozen=True)
class OutagePlanResult:
    verdict: str                       # "possible" | "alternative" | "impossible"
    alternative_start: int | None
    message: str
    day_slack_norms: dict[int, float]  # for the originally requested window


def _connected_without(net: Network, removed_line_ids: set[int]) -> bool:
    for rid in removed_line_ids:
        adj: dict[int, list[int]] = {b.id: [] for b in net.buses}
        for ln in net.lines:
            if ln.id == rid:
                continue
            adj[ln.from_bus].append(ln.to_bus)
            adj[ln.to_bus].append(ln.from_bus)
        start = net.buses[0].id
        seen = {start}
        stack = [start]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        if len(seen) != net.n_bus:
            return False
    return True


def ptdf_matrix(net: Network) -> np.ndarray:
    """Injection-to-flow sensitivities (lines x buses), slack bus reference."""
    n = net.n_bus
    slack = next(i for i, b in enumerate(net.buses) if b.kind == "slack")
    B = np.zeros((n, n))
    for ln in net.lines:
        f, t = net.bus_index(ln.from_bus), net.bus_index(ln.to_bus)
        y = 1.0 / ln.x
        B[f, f] += y
        B[t, t] += y
        B[f, t] -= y
        B[t, f] -= y
    keep = [i for i in range(n) if i != slack]
    Bred_inv = np.linalg.inv(B[np.ix_(keep, keep)])
    theta_sens = np.zeros((n, n))
    theta_sens[np.ix_(keep, keep)] = Bred_inv
    ptdf = np.zeros((len(net.lines), n))
    for k, ln in enumerate(net.lines):
        f, t = net.bus_index(ln.from_bus), net.bus_index(ln.to_bus)
        ptdf[k] = (theta_sens[f] - theta_sens[t]) / ln.x
    return ptdf


def lodf_matrix(net: Network, ptdf: np.ndarray) -> np.ndarray:
    """Line-outage redistribution factors (lines x lines)."""
    nl = len(net.lines)
    M = np.zeros((nl, nl))
    for c, ln in enumerate(net.lines):
        f, t = net.bus_index(ln.from_bus), net.bus_index(ln.to_bus)
        M[:, c] = ptdf[:, f] - ptdf[:, t]
    lodf = np.zeros((nl, nl))
    for c in range(nl):
        denom = 1.0 - M[c, c]
        if abs(denom) < 1e-9:
            # outage would island part of the grid; caller validates this away
            lodf[:, c] = np.nan
        else:
            lodf[:, c] = M[:, c] / denom
        lodf[c, c] = -1.0
    return lodf


def solve_scopf(problem: ScopfProblem) -> ScopfSolution:
    """Solve one daily SCOPF as an LP with per-constraint L1 slack penalty."""
    net = problem.network
    gens = net.generators
    ng = len(gens)
    nl = len(net.lines)
    loads = (
        np.asarray(problem.loads, dtype=float)
        if problem.loads is not None
        else apply_load_step(net, problem.day)[0]
    )
    demand = float(loads.sum())

    ptdf = ptdf_matrix(net)
    lodf = lodf_matrix(net, ptdf)
    cont_pos = [next(k for k, ln in enumerate(net.lines) if ln.id == c)
                for c in problem.contingencies]

    # flow_l = A_f @ P_G + c_f
    A_f = np.zeros((nl, ng))
    for j, g in enumerate(gens):
        A_f[:, j] = ptdf[:, net.bus_index(g.bus)]
    c_f = -ptdf @ loads
    ratings = np.array([ln.rating for ln in net.lines])

    # slack layout: [balance, base lines (nl), contingencies (nc * (nl-1))]
    ns = 1 + nl + len(cont_pos) * (nl - 1)
    nx = ng + ns
    cost = np.zeros(nx)
    cost[:ng] = [g.cost for g in gens]
    cost[ng:] = problem.penalty

    rows: list[np.ndarray] = []
    rhs: list[float] = []

    def add_abs_leq(coeff_g: np.ndarray, const: float, bound: float, s_idx: int):
        # |coeff_g . P_G + const| <= bound + s
        for sign in (1.0, -1.0):
            row = np.zeros(nx)
            row[:ng] = sign * coeff_g
            row[ng + s_idx] = -1.0
            rows.append(row)
            rhs.append(bound - sign * const)

    add_abs_leq(np.ones(ng), -demand, 0.0, 0)
    for l in range(nl):
        add_abs_leq(A_f[l], c_f[l], ratings[l], 1 + l)
    s_idx = 1 + nl
    for c in cont_pos:
        for l in range(nl):
            if l == c:
                continue
            coeff = A_f[l] + lodf[l, c] * A_f[c]
            const = c_f[l] + lodf[l, c] * c_f[c]
            add_abs_leq(coeff, const, ratings[l], s_idx)
            s_idx += 1

    bounds = [
        (problem.availability[j] * g.p_min, problem.availability[j] * g.p_max)
        for j, g in enumerate(gens)
    ] + [(0, None)] * ns

    res = linprog(cost, A_ub=np.array(rows), b_ub=np.array(rhs), bounds=bounds,
                  method="highs")
    if not res.success:
        return ScopfSolution(
            dispatch=np.zeros(ng), slack=np.full(ns, np.inf),
            objective=float("inf"), status="solver-failure",
        )
    x = res.x
    slack = np.where(np.abs(x[ng:]) < 1e-12, 0.0, x[ng:])
    return ScopfSolution(
        dispatch=x[:ng], slack=slack, objective=float(res.fun), status="optimal",
    )


def evaluate_window(
    net: Network,
    calendar: MaintenanceCalendar,
    gen_pos: int,
    start_day: int,
    duration_days: int,
    contingencies: tuple[int, ...],
    penalty: float = DEFAULT_LAMBDA,
    day_cache: dict[int, float] | None = None,
) -> dict[int, float]:
    """Slack norms per day for an outage window; fresh calendar per call.

    ``day_cache`` may be shared between calls with identical network,
    calendar, asset and settings: a day's result only depends on that
    day's availability column with the asset forced out.
    """
    cal = calendar.with_outage(gen_pos, range(start_day, start_day + duration_days))
    norms: dict[int, float] = {}
    for day in range(start_day, start_day + duration_days):
        if day_cache is not None and day in day_cache:
            norms[day] = day_cache[day]
            continue
        sol = solve_scopf(ScopfProblem(
            network=net, day=day, availability=cal.availability[:, day],
            contingencies=contingencies, penalty=penalty,
        ))
        norms[day] = sol.slack_norm if sol.status == "optimal" else float("inf")
        if day_cache is not None:
            day_cache[day] = norms[day]
    return norms


def _window_feasible(norms: dict[int, float]) -> bool:
    return all(v <= SLACK_ZERO_TOL for v in norms.values())


def plan_outage(
    net: Network,
    calendar: MaintenanceCalendar,
    request: OutageRequest,
    contingencies: tuple[int, ...],
    penalty: float = DEFAULT_LAMBDA,
    scan_later: bool = False,
) -> OutagePlanResult:
    """Assess an outage request; on infeasibility scan earlier starts.

    The earlier-start scan probes each candidate on a fresh calendar (the
    requested window is not left blocked between probes). With
    ``scan_later`` the symmetric forward scan runs if no earlier start
    exists.
    """
    gen_pos = net.generator_index(request.asset)  # raises on unknown asset
    horizon = calendar.horizon_days
    if request.start_day + request.duration_days > horizon:
        raise ValueError(
            f"window [{request.start_day}, "
            f"{request.start_day + request.duration_days}) exceeds horizon {horizon}"
        )

    cache: dict[int, float] = {}
    norms = evaluate_window(net, calendar, gen_pos, request.start_day,
                            request.duration_days, contingencies, penalty,
                            day_cache=cache)
    if _window_feasible(norms):
        return OutagePlanResult(
            verdict="possible", alternative_start=None,
            message="requested outage plan is possible.",
            day_slack_norms=norms,
        )

    candidates = list(range(request.start_day - 1, -1, -1))
    if scan_later:
        candidates += list(range(request.start_day + 1,
                                 horizon - request.duration_days + 1))
    for t0 in candidates:
        cand = evaluate_window(net, calendar, gen_pos, t0,
                               request.duration_days, contingencies, penalty,
                               day_cache=cache)
        if _window_feasible(cand):
            return OutagePlanResult(
                verdict="alternative", alternative_start=t0,
                message=(
                    "requested outage plan is not possible, "
                    f"but starting at {t0} is possible."
                ),
                day_slack_norms=norms,
            )
    return OutagePlanResult(
        verdict="impossible", alternative_start=None,
        message="requested outage plan is not possible.",
        day_slack_norms=norms,
    )


def feasibility_map(
    net: Network,
    calendar: MaintenanceCalendar,
    asset: int,
    duration_days: int,
    contingencies: tuple[int, ...],
    penalty: float = DEFAULT_LAMBDA,
) -> np.ndarray:
    """Feasibility of every start day whose window fits the horizon."""
    gen_pos = net.generator_index(asset)
    n_starts = calendar.horizon_days - duration_days + 1
    out = np.zeros(n_starts, dtype=bool)
    cache: dict[int, float] = {}
    for t0 in range(n_starts):
        norms = evaluate_window(net, calendar, gen_pos, t0, duration_days,
                                contingencies, penalty, day_cache=cache)
        out[t0] = _window_feasible(norms)
    return out
