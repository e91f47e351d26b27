"""AC power flow, security labeling and the MV connection check.

A connection request adds a requested hourly profile to the loads at one
bus, solves a Newton-Raphson power flow per step and labels each step
secure or not against voltage and line-loading limits. The verdict text
is the exact sentence the chat layer relays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .model import Network, NetworkError, apply_load_step

__all__ = [
    "PowerFlowSolution",
    "SecurityLimits",
    "ConnectionRequest",
    "FeasibilityVerdict",
    "SecurityViolation",
    "build_ybus",
    "solve_ac",
    "security_label",
    "check_connection",
]

TOLERANCE = 1e-8
MAX_ITERATIONS = 50
DEFAULT_POWER_FACTOR = 0.95


@dataclass(frozen=True)
class SecurityLimits:
    v_min: float = 0.975
    v_max: float = 1.03
    l_min: float = 0.0   # percent; nonzero minimum loading is unusual but allowed
    l_max: float = 60.0

    def __post_init__(self):
        if not self.v_min < self.v_max:
            raise ValueError("v_min must be below v_max")
        if not (0 <= self.l_min < self.l_max):
            raise ValueError("loading limits must satisfy 0 <= l_min < l_max")


@dataclass(frozen=True)
class PowerFlowSolution:
    v_magnitudes: np.ndarray       # pu, bus order
    v_angles: np.ndarray           # radians
    line_loadings: np.ndarray      # percent of rating, max over both ends
    converged: bool
    iterations: int
    max_mismatch: float
    failure_reason: str = ""


@dataclass(frozen=True)
class SecurityViolation:
    element: str
    value: float
    bound: float
    rule: str

    def __str__(self) -> str:
        return f"{self.element}: {self.rule} (value {self.value:.6g}, bound {self.bound:g})"


@dataclass(frozen=True)
class ConnectionRequest:
    bus: int
    profile_mw: tuple[float, ...]
    power_factor: float = DEFAULT_POWER_FACTOR

    def __post_init__(self):
        if any(v < 0 for v in self.profile_mw):
            raise ValueError("profile values must be >= 0")
        if not (0 < self.power_factor <= 1):
            raise ValueError("power factor must be in (0, 1]")


@dataclass(frozen=True)
class FeasibilityVerdict:
    feasible: bool
    infeasible_steps: tuple[int, ...]
    labels: tuple[int, ...]
    message: str
    violations: dict[int, tuple[SecurityViolation, ...]] = field(default_factory=dict)


def build_ybus(net: Network) -> np.ndarray:
    n = net.n_bus
    Y = np.zeros((n, n), dtype=complex)
    for ln in net.lines:
        f = net.bus_index(ln.from_bus)
        t = net.bus_index(ln.to_bus)
        y = 1.0 / complex(ln.r, ln.x)
        sh = 0.5j * ln.b_shunt
        Y[f, f] += y + sh
        Y[t, t] += y + sh
        Y[f, t] -= y
        Y[t, f] -= y
    return Y


def solve_ac(net: Network, loads: tuple[np.ndarray, np.ndarray] | None = None,
             generation: np.ndarray | None = None) -> PowerFlowSolution:
    """Newton-Raphson from flat start.

    ``loads`` is a per-bus (P, Q) pair in pu; defaults to base loads.
    ``generation`` optionally adds fixed active injections per bus (pv/pq).
    Non-convergence and singular Jacobians return a non-converged solution
    rather than raising; callers treat those as insecure.
    """
    p_load, q_load = loads if loads is not None else net.base_loads()
    Y = build_ybus(net)
    G, B = np.ascontiguousarray(Y.real), np.ascontiguousarray(Y.imag)
    n = net.n_bus

    Vm = np.ones(n)
    Va = np.zeros(n)
    pv, pq = [], []
    for i, b in enumerate(net.buses):
        if b.kind == "slack":
            Vm[i] = b.voltage_setpoint
        elif b.kind == "pv":
            Vm[i] = b.voltage_setpoint
            pv.append(i)
        else:
            pq.append(i)

    p_spec = -np.asarray(p_load, dtype=float).copy()
    q_spec = -np.asarray(q_load, dtype=float).copy()
    if generation is not None:
        p_spec = p_spec + np.asarray(generation, dtype=float)

    try:
        Vm, Va, converged, iterations, max_mis = kernels.newton_core(
            G, B, Vm, Va, p_spec, q_spec,
            np.array(pv, dtype=np.int64), np.array(pq, dtype=np.int64),
            TOLERANCE, MAX_ITERATIONS,
        )
    except np.linalg.LinAlgError:
        return PowerFlowSolution(
            v_magnitudes=Vm, v_angles=Va,
            line_loadings=np.zeros(len(net.lines)),
            converged=False, iterations=0, max_mismatch=float("inf"),
            failure_reason="singular Jacobian",
        )

    loadings = _line_loadings(net, Vm, Va)
    reason = "" if converged else f"no convergence in {iterations} iterations"
    return PowerFlowSolution(
        v_magnitudes=Vm, v_angles=Va, line_loadings=loadings,
        converged=bool(converged), iterations=int(iterations),
        max_mismatch=float(max_mis), failure_reason=reason,
    )


def _line_loadings(net: Network, Vm: np.ndarray, Va: np.ndarray) -> np.ndarray:
    V = Vm * np.exp(1j * Va)
    out = np.zeros(len(net.lines))
    for k, ln in enumerate(net.lines):
        f = net.bus_index(ln.from_bus)
        t = net.bus_index(ln.to_bus)
        y = 1.0 / complex(ln.r, ln.x)
        sh = 0.5j * ln.b_shunt
        i_f = y * (V[f] - V[t]) + sh * V[f]
        i_t = y * (V[t] - V[f]) + sh * V[t]
        s_f = abs(V[f] * np.conj(i_f))
        s_t = abs(V[t] * np.conj(i_t))
        out[k] = max(s_f, s_t) / ln.rating * 100.0
    return out


def security_label(
    solution: PowerFlowSolution, net: Network, limits: SecurityLimits
) -> tuple[int, list[SecurityViolation]]:
    """s = 1 iff every bus and line is within limits; non-converged is 0."""
    if not solution.converged:
        return 0, [SecurityViolation("powerflow", float("nan"), float("nan"),
                                     "no solution")]
    violations: list[SecurityViolation] = []
    for b, vm in zip(net.buses, solution.v_magnitudes):
        if vm < limits.v_min:
            violations.append(SecurityViolation(
                f"bus {b.id}", float(vm), limits.v_min, "voltage below V_min"))
        elif vm > limits.v_max:
            violations.append(SecurityViolation(
                f"bus {b.id}", float(vm), limits.v_max, "voltage above V_max"))
    for ln, load in zip(net.lines, solution.line_loadings):
        if load < limits.l_min:
            violations.append(SecurityViolation(
                f"line {ln.id}", float(load), limits.l_min, "loading below L_min"))
        elif load > limits.l_max:
            violations.append(SecurityViolation(
                f"line {ln.id}", float(load), limits.l_max, "loading above L_max"))
    return (0 if violations else 1), violations


def check_connection(
    net: Network, request: ConnectionRequest, limits: SecurityLimits
) -> FeasibilityVerdict:
    """Add the requested profile at one bus and label every step.

    The request is in MW; reactive power follows from the power factor
    (lagging). Feasible iff all per-step labels are 1.
    """
    try:
        bus_pos = net.bus_index(request.bus)
    except NetworkError as exc:
        raise ValueError(str(exc)) from exc
    horizon = max(net.horizon, 1)
    if len(request.profile_mw) != horizon:
        raise ValueError(
            f"profile length {len(request.profile_mw)} does not match "
            f"network horizon {horizon}"
        )

    tan_phi = np.sqrt(1.0 - request.power_factor**2) / request.power_factor
    labels: list[int] = []
    violations: dict[int, tuple[SecurityViolation, ...]] = {}
    for t in range(horizon):
        p, q = apply_load_step(net, t)
        p = p.copy()
        q = q.copy()
        add_pu = request.profile_mw[t] / net.base_mva
        p[bus_pos] += add_pu
        q[bus_pos] += add_pu * tan_phi
        sol = solve_ac(net, (p, q))
        s, viols = security_label(sol, net, limits)
        labels.append(s)
        if viols:
            violations[t] = tuple(viols)

    infeasible = tuple(t for t, s in enumerate(labels) if s == 0)
    if infeasible:
        message = "infeasible at times {" + ", ".join(str(t) for t in infeasible) + "}."
    else:
        message = "feasible."
    return FeasibilityVerdict(
        feasible=not infeasible,
        infeasible_steps=infeasible,
        labels=tuple(labels),
        message=message,
        violations=violations,
    )
