"""Hot numeric kernels for the Newton-Raphson power flow.

The core iteration is written in plain array code so the same source runs
either compiled with numba (default) or as pure numpy/python. Set
``GRIDCHAT_PURE_NUMPY=1`` before import to select the fallback path;
``benchmarks/benchmark_pf.py`` compares both.
"""

from __future__ import annotations

import os

import numpy as np

PURE_NUMPY = os.environ.get("GRIDCHAT_PURE_NUMPY", "") == "1"


def backend_name() -> str:
    return "numpy" if PURE_NUMPY else "numba"


def _newton_core(G, B, Vm, Va, p_spec, q_spec, pv, pq, tol, max_iter):
    """Polar Newton-Raphson on dense admittance matrices.

    Unknowns are angles at pv+pq buses and magnitudes at pq buses. Returns
    (Vm, Va, converged, iterations, max_mismatch). Raises on a singular
    Jacobian (np.linalg.solve).
    """
    n = G.shape[0]
    pvpq = np.concatenate((pv, pq))
    npv = pv.shape[0]
    npq = pq.shape[0]
    nun = npv + 2 * npq

    it = 0
    max_mis = 0.0
    converged = False
    for it in range(max_iter + 1):
        # bus injections from the current voltage estimate
        P = np.zeros(n)
        Q = np.zeros(n)
        for i in range(n):
            pi = 0.0
            qi = 0.0
            for j in range(n):
                th = Va[i] - Va[j]
                c = np.cos(th)
                s = np.sin(th)
                pi += Vm[j] * (G[i, j] * c + B[i, j] * s)
                qi += Vm[j] * (G[i, j] * s - B[i, j] * c)
            P[i] = Vm[i] * pi
            Q[i] = Vm[i] * qi

        F = np.zeros(nun)
        for k in range(npv + npq):
            F[k] = P[pvpq[k]] - p_spec[pvpq[k]]
        for k in range(npq):
            F[npv + npq + k] = Q[pq[k]] - q_spec[pq[k]]

        max_mis = 0.0
        for k in range(nun):
            if abs(F[k]) > max_mis:
                max_mis = abs(F[k])
        if max_mis <= tol:
            converged = True
            break
        if it == max_iter:
            break

        J = np.zeros((nun, nun))
        for a in range(npv + npq):
            i = pvpq[a]
            # dP/dtheta
            for b in range(npv + npq):
                j = pvpq[b]
                if i == j:
                    J[a, b] = -Q[i] - B[i, i] * Vm[i] * Vm[i]
                else:
                    th = Va[i] - Va[j]
                    J[a, b] = Vm[i] * Vm[j] * (
                        G[i, j] * np.sin(th) - B[i, j] * np.cos(th)
                    )
            # dP/dVm
            for b in range(npq):
                j = pq[b]
                if i == j:
                    J[a, npv + npq + b] = P[i] / Vm[i] + G[i, i] * Vm[i]
                else:
                    th = Va[i] - Va[j]
                    J[a, npv + npq + b] = Vm[i] * (
                        G[i, j] * np.cos(th) + B[i, j] * np.sin(th)
                    )
        for a in range(npq):
            i = pq[a]
            # dQ/dtheta
            for b in range(npv + npq):
                j = pvpq[b]
                if i == j:
                    J[npv + npq + a, b] = P[i] - G[i, i] * Vm[i] * Vm[i]
                else:
                    th = Va[i] - Va[j]
                    J[npv + npq + a, b] = -Vm[i] * Vm[j] * (
                        G[i, j] * np.cos(th) + B[i, j] * np.sin(th)
                    )
            # dQ/dVm
            for b in range(npq):
                j = pq[b]
                if i == j:
                    J[npv + npq + a, npv + npq + b] = Q[i] / Vm[i] - B[i, i] * Vm[i]
                else:
                    th = Va[i] - Va[j]
                    J[npv + npq + a, npv + npq + b] = Vm[i] * (
                        G[i, j] * np.sin(th) - B[i, j] * np.cos(th)
                    )

        dx = np.linalg.solve(J, -F)
        for k in range(npv + npq):
            Va[pvpq[k]] += dx[k]
        for k in range(npq):
            Vm[pq[k]] += dx[npv + npq + k]

    return Vm, Va, converged, it, max_mis


def _bus_injections(G, B, Vm, Va):
    """Recompute P, Q injections from a voltage state (mismatch checks)."""
    n = G.shape[0]
    P = np.zeros(n)
    Q = np.zeros(n)
    for i in range(n):
        pi = 0.0
        qi = 0.0
        for j in range(n):
            th = Va[i] - Va[j]
            pi += Vm[j] * (G[i, j] * np.cos(th) + B[i, j] * np.sin(th))
            qi += Vm[j] * (G[i, j] * np.sin(th) - B[i, j] * np.cos(th))
        P[i] = Vm[i] * pi
        Q[i] = Vm[i] * qi
    return P, Q


if PURE_NUMPY:
    newton_core = _newton_core
    bus_injections = _bus_injections
else:
    from numba import njit

    newton_core = njit(cache=True)(_newton_core)
    bus_injections = njit(cache=True)(_bus_injections)
