"""Unit schedules, flow states, and an independent constraint checker.

The checker evaluates each constraint family directly from its algebraic form
and shares no code with the solvers that produce schedules.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .case import CaseData, NetworkModel, UnitParams

TOL = 1e-6


@dataclass
class UnitSchedule:
    x: np.ndarray  # on/off, int 0/1
    u: np.ndarray  # start-up flag, int 0/1
    p: np.ndarray  # MW

    @classmethod
    def from_commitment(cls, unit: UnitParams, x, p) -> "UnitSchedule":
        x = np.asarray(x, dtype=int)
        return cls(x, startups(x, unit), np.asarray(p, dtype=float))

    @classmethod
    def off(cls, T: int) -> "UnitSchedule":
        z = np.zeros(T, dtype=int)
        return cls(z, z.copy(), np.zeros(T))

    @property
    def on_hours(self) -> int:
        return int(self.x.sum())

    def cost(self, unit: UnitParams) -> float:
        return float(unit.energy_cost * self.p.sum()
                     + unit.startup_cost * self.u.sum()
                     + unit.noload_cost * self.x.sum())


@dataclass
class FlowState:
    theta: np.ndarray  # (N, T) radians
    f: np.ndarray  # (L, T) MW


def startups(x: np.ndarray, unit: UnitParams | None) -> np.ndarray:
    """Minimal start-up indicators u_t = max(0, x_t - x_{t-1})."""
    prev0 = 1 if (unit is not None and unit.init_on) else 0
    prev = np.concatenate([[prev0], x[:-1]])
    return np.maximum(0, x - prev).astype(int)


def _runs(x: np.ndarray):
    """Yield (value, start, end) for maximal constant runs, end inclusive."""
    T = len(x)
    s = 0
    for t in range(1, T + 1):
        if t == T or x[t] != x[s]:
            yield int(x[s]), s, t - 1
            s = t


def unit_violations(unit: UnitParams, sched: UnitSchedule, tol: float = TOL) -> list[str]:
    """All violations of capacity, start-up, min up/down and ramp limits."""
    x, u, p = np.asarray(sched.x), np.asarray(sched.u), np.asarray(sched.p, dtype=float)
    T = len(x)
    out = []
    if not (len(u) == T and len(p) == T):
        return ["schedule arrays differ in length"]
    if np.any((x != 0) & (x != 1)) or np.any((u != 0) & (u != 1)):
        out.append("x and u must be binary")
    for t in range(T):
        lo, hi = x[t] * unit.p_min, x[t] * unit.p_max
        if not (lo - tol <= p[t] <= hi + tol):
            out.append(f"hour {t + 1}: capacity {p[t]:.6f} outside [{lo}, {hi}]")
    x_prev = np.concatenate([[1 if unit.init_on else 0], x[:-1]])
    p_prev = np.concatenate([[unit.init_power], p[:-1]])
    for t in range(T):
        if x[t] - x_prev[t] > u[t]:
            out.append(f"hour {t + 1}: start-up not flagged")
        if u[t] > max(0, x[t] - x_prev[t]):
            out.append(f"hour {t + 1}: start-up flag not minimal")
        r = unit.initial_ramp if t == 0 else unit.ramp
        up_lim = r * x_prev[t] + unit.startup_ramp * (1 - x_prev[t])
        dn_lim = r * x[t] + unit.startup_ramp * (1 - x[t])
        if p[t] - p_prev[t] > up_lim + tol:
            out.append(f"hour {t + 1}: ramp-up {p[t] - p_prev[t]:.6f} > {up_lim}")
        if p_prev[t] - p[t] > dn_lim + tol:
            out.append(f"hour {t + 1}: ramp-down {p_prev[t] - p[t]:.6f} > {dn_lim}")
    # Minimum up/down time: a run that ends before the horizon must be long
    # enough, counting the initial dwell when the run continues the initial state.
    init_state = 1 if unit.init_on else 0
    for val, s, e in _runs(x):
        length = e - s + 1
        if s == 0 and val == init_state:
            length += unit.init_dwell
        need = unit.min_up if val == 1 else unit.min_down
        if e < T - 1 and length < need:
            out.append(f"hours {s + 1}-{e + 1}: {'on' if val else 'off'} run of {length} < {need}")
    # A state flip at hour 1 also ends the initial run.
    if T and x[0] != init_state:
        need = unit.min_up if init_state == 1 else unit.min_down
        if unit.init_dwell < need:
            out.append(f"initial {'on' if init_state else 'off'} dwell {unit.init_dwell} < {need}")
    return out


def flow_violations(net: NetworkModel, flows: FlowState, tol: float = TOL) -> list[str]:
    out = []
    theta, f = np.asarray(flows.theta), np.asarray(flows.f)
    for k, ln in enumerate(net.lines):
        dc = (theta[ln.sending] - theta[ln.receiving]) / ln.reactance
        if np.max(np.abs(dc - f[k]), initial=0.0) > tol:
            out.append(f"line {k}: flow differs from angle difference over reactance")
        if np.any(f[k] < ln.f_min - tol) or np.any(f[k] > ln.f_max + tol):
            out.append(f"line {k}: flow outside [{ln.f_min}, {ln.f_max}]")
    if np.max(np.abs(theta[net.reference_bus]), initial=0.0) > 1e-12:
        out.append("reference angle is not zero")
    return out


def balance_violations(case: CaseData, schedules, flows: FlowState | None = None,
                       tol: float = TOL) -> list[str]:
    """Demand balance (system) or nodal balance (network) residuals above tol."""
    P = np.array([s.p for s in schedules])
    out = []
    if case.mode == "system":
        res = case.system_demand - P.sum(axis=0)
        for t in np.flatnonzero(np.abs(res) > tol):
            out.append(f"hour {t + 1}: generation misses demand by {res[t]:.6f}")
    else:
        net = case.network
        for n in range(net.bus_count):
            inj = sum(P[i] for i, unit in enumerate(case.units) if unit.bus == n)
            inflow = sum(flows.f[k] for k, ln in enumerate(net.lines) if ln.receiving == n)
            outflow = sum(flows.f[k] for k, ln in enumerate(net.lines) if ln.sending == n)
            res = np.asarray(inflow + inj - outflow - net.nodal_demand[n], dtype=float)
            res = np.broadcast_to(res, (case.horizon,))
            for t in np.flatnonzero(np.abs(res) > tol):
                out.append(f"bus {n}, hour {t + 1}: nodal imbalance {res[t]:.6f}")
    return out


def solution_violations(case: CaseData, schedules, flows: FlowState | None = None,
                        tol: float = TOL) -> list[str]:
    out = []
    for unit, s in zip(case.units, schedules):
        out.extend(f"unit {unit.id}: {v}" for v in unit_violations(unit, s, tol))
    if case.mode == "nodal":
        out.extend(flow_violations(case.network, flows, tol))
    out.extend(balance_violations(case, schedules, flows, tol))
    return out
