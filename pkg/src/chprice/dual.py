"""Lagrangian, constraint violations, and dual function evaluation.

Multipliers are plain float arrays shaped like the relaxed constraints:
(T,) for the system demand balance, (N, T) for nodal balance.
"""

from __future__ import annotations

from concurrent.futures import Executor
from dataclasses import dataclass, field

import numpy as np

from .case import SYSTEM, CaseData
from .network import flows_best_response, net_export
from .schedules import FlowState, UnitSchedule
from .unit import improve


def check_multipliers(case: CaseData, lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if lam.shape != case.price_shape:
        raise ValueError(f"multipliers shaped {lam.shape}, expected {case.price_shape}")
    if not np.all(np.isfinite(lam)):
        raise ValueError("multipliers must be finite")
    return lam


def unit_prices(case: CaseData, lam: np.ndarray) -> list[np.ndarray]:
    """Price vector seen by each unit: system price or its bus row."""
    if case.mode == SYSTEM:
        return [lam] * len(case.units)
    return [lam[u.bus] for u in case.units]


def violation(case: CaseData, schedules, flows: FlowState | None = None) -> np.ndarray:
    """Relaxed-constraint residuals; positive means a generation shortage.

    System: D_t - sum_i p_it.  Nodal: D_nt + outflow - inflow - p_nt.
    """
    P = np.array([s.p for s in schedules], dtype=float)
    if P.shape != (len(case.units), case.horizon):
        raise ValueError("schedules do not match the case dimensions")
    if case.mode == SYSTEM:
        return case.system_demand - P.sum(axis=0)
    if flows is None:
        raise ValueError("nodal violations need flows")
    net = case.network
    if flows.f.shape != (len(net.lines), case.horizon):
        raise ValueError("flows do not match the case dimensions")
    return net.nodal_demand + net_export(net, flows.f) - case.unit_bus_matrix() @ P


def lagrangian(case: CaseData, lam, schedules, flows: FlowState | None = None) -> float:
    lam = check_multipliers(case, lam)
    cost = sum(s.cost(u) for u, s in zip(case.units, schedules))
    return float(cost + np.sum(lam * violation(case, schedules, flows)))


def _solve_units(case, prices, incumbents, executor):
    units = case.units
    if incumbents is None:
        incumbents = [None] * len(units)
    if executor is None:
        return [improve(u, pr, inc) for u, pr, inc in zip(units, prices, incumbents)]
    return list(executor.map(improve, units, prices, incumbents))


def solve_relaxed(case: CaseData, lam, incumbents=None, executor: Executor | None = None,
                  flow_backend: str = "highs"):
    """Minimize the Lagrangian over unit-feasible schedules (and flows).

    Returns (schedules, flows, value). The per-unit results are summed in unit
    order, so the value does not depend on how the work was distributed.
    """
    lam = check_multipliers(case, lam)
    results = _solve_units(case, unit_prices(case, lam), incumbents, executor)
    schedules = [s for s, _ in results]
    value = float(np.sum(lam * case.demand))
    for _, v in results:
        value += v
    flows = None
    if case.mode != SYSTEM:
        flows, fval = flows_best_response(case.network, lam, flow_backend)
        value += fval
    return schedules, flows, value


def exact_dual(case: CaseData, lam, executor: Executor | None = None):
    """q(lam) with its minimizing schedules and flows."""
    schedules, flows, value = solve_relaxed(case, lam, None, executor)
    return value, schedules, flows


def surrogate_condition_holds(L_new: float, L_prev: float) -> bool:
    """Strict decrease of the Lagrangian at the same multipliers, up to 1e-9 relative."""
    return L_new < L_prev - 1e-9 * max(1.0, abs(L_prev))


@dataclass
class SurrogateIterate:
    k: int
    multipliers: np.ndarray
    schedules: list
    flows: FlowState | None
    L_tilde: float
    g: np.ndarray
    g_norm: float
    stepsize: float = np.nan
    exact: bool = True
    extra: dict = field(default_factory=dict)


def make_iterate(case: CaseData, k: int, lam, schedules, flows, exact: bool = True):
    g = violation(case, schedules, flows)
    return SurrogateIterate(k, np.array(lam, dtype=float), schedules, flows,
                            lagrangian(case, lam, schedules, flows), g,
                            float(np.linalg.norm(g)), exact=exact)
