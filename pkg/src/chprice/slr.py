"""Surrogate Lagrangian relaxation driver."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bounds import BoundsLedger, BoundTracker, ledger_update
from .case import SYSTEM, CaseData, merit_order
from .dual import lagrangian, make_iterate, solve_relaxed, surrogate_condition_holds
from .network import balanced_flows
from .recovery import FeasibleSolution, recover

log = logging.getLogger(__name__)

CONVERGED = "converged"
RELAXED_SATISFIED = "relaxed constraints satisfied"
ITERATION_LIMIT = "iteration limit"
TIME_LIMIT = "time limit"


@dataclass
class SlrConfig:
    M: float = 20.0
    rho: float = 0.5
    alpha: float = 0.1
    exact_dual_every: int = 1
    quality_tol: float = 1e-3
    max_iters: int = 5000
    max_seconds: float = 900.0
    worker_count: int = 1

    def __post_init__(self):
        if not self.M > 1:
            raise ValueError("M must exceed 1")
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.quality_tol > 0:
            raise ValueError("quality_tol must be positive")
        if self.exact_dual_every < 1:
            raise ValueError("exact_dual_every must be at least 1")
        if self.max_iters < 0 or self.max_seconds <= 0:
            raise ValueError("limits must be non-negative")
        if self.worker_count < 1:
            raise ValueError("worker_count must be at least 1")


class ConvergenceSignal(Exception):
    """The relaxed constraints are met exactly; the multipliers are optimal."""


def init_multipliers(case: CaseData) -> np.ndarray:
    """Merit-order marginal cost per hour, replicated over buses in nodal mode."""
    stack = merit_order(case)
    costs = np.array([u.energy_cost for u in stack])
    cum = np.cumsum([u.p_max for u in stack])
    lam = np.empty(case.horizon)
    for t, d in enumerate(case.total_demand):
        if d <= 0:
            lam[t] = costs[0]
        elif d > cum[-1]:
            lam[t] = costs.max()
        else:
            lam[t] = costs[np.searchsorted(cum, d - 1e-9)]
    if case.mode == SYSTEM:
        return lam
    return np.tile(lam, (case.network.bus_count, 1))


def stepsize_update(s_prev: float, g_norm_prev: float, g_norm_cur: float, k: int,
                    M: float, rho: float) -> float:
    if k < 1:
        raise ValueError("stepsize law starts at k = 1")
    if g_norm_cur == 0:
        raise ConvergenceSignal(RELAXED_SATISFIED)
    factor = 1.0 - 1.0 / (M * k ** (1.0 - 1.0 / k ** rho))
    return factor * s_prev * g_norm_prev / g_norm_cur


def update_multipliers(lam, s, g) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    g = np.asarray(g, dtype=float)
    if lam.shape != g.shape:
        raise ValueError("multiplier and violation shapes differ")
    return lam + s * g


@dataclass
class ResultBundle:
    case_name: str
    prices: np.ndarray
    ledger: BoundsLedger
    history: list
    status: str
    limit_hit: bool
    timings: dict
    best_feasible: FeasibleSolution | None = None
    config: SlrConfig = field(default_factory=SlrConfig)

    @property
    def quality(self) -> float:
        return self.ledger.quality

    @property
    def duality_gap(self) -> float:
        return self.ledger.duality_gap


class _Driver:
    def __init__(self, case: CaseData, config: SlrConfig, executor):
        self.case = case
        self.cfg = config
        self.executor = executor
        self.ledger = BoundsLedger()
        self.history: list = []
        self.best_lam = None
        self.best_feasible = None
        self.recovery_seconds = 0.0
        self.cache: dict = {}
        self.t_start = time.perf_counter()

    def exact_event(self, it):
        """Record q(lam^k) and refresh the feasible cost."""
        q = it.extra["q_value"]
        it.extra["q_exact"] = q
        if q > self.ledger.q_best:
            self.best_lam = it.multipliers
        ledger_update(self.ledger, q_candidate=q)
        t0 = time.perf_counter()
        sol = recover(self.case, it.schedules, self.cache)
        self.recovery_seconds += time.perf_counter() - t0
        if sol is None:
            log.info("iteration %d: no feasible cost", it.k)
            return
        if sol.cost < self.ledger.feasible_cost_best:
            self.best_feasible = sol
        ledger_update(self.ledger, cfeas_candidate=sol.cost)

    def snapshot(self, it, event=None):
        it.extra.update(self.ledger.snapshot())
        it.extra["window_event"] = event
        it.extra["seconds"] = time.perf_counter() - self.t_start


def run(case: CaseData, config: SlrConfig | None = None) -> ResultBundle:
    cfg = config or SlrConfig()
    t_start = time.perf_counter()
    executor = ProcessPoolExecutor(cfg.worker_count) if cfg.worker_count > 1 else None
    try:
        drv = _Driver(case, cfg, executor)
        drv.t_start = t_start
        status = _loop(drv, t_start)
    finally:
        if executor is not None:
            executor.shutdown()
    total = time.perf_counter() - t_start
    bound_s = drv.bound_seconds
    timings = {
        "total_seconds": total,
        "bound_seconds": bound_s,
        "feasible_cost_seconds": drv.recovery_seconds,
        "bound_share": bound_s / total if total > 0 else 0.0,
        "feasible_cost_share": drv.recovery_seconds / total if total > 0 else 0.0,
        "iterations": len(drv.history),
    }
    prices = drv.best_lam if drv.best_lam is not None else drv.history[0].multipliers
    return ResultBundle(case.name, np.array(prices), drv.ledger, drv.history, status,
                        status in (ITERATION_LIMIT, TIME_LIMIT), timings, drv.best_feasible, cfg)


def _iterate(drv: _Driver, k: int, lam, prev):
    """Relaxed solve at lam, packaged as an iterate.

    In nodal mode the flows are the exact minimizer that best balances the
    buses (see ``balanced_flows``), so uniform prices stay uniform wherever
    the network is not congested.
    """
    case = drv.case
    incumbents = None if prev is None else prev.schedules
    schedules, flows, q = solve_relaxed(case, lam, incumbents, drv.executor)
    if case.mode != SYSTEM:
        P = np.array([s.p for s in schedules])
        residual = case.network.nodal_demand - case.unit_bus_matrix() @ P
        flows, _ = balanced_flows(case.network, lam, residual)
    it = make_iterate(case, k, lam, schedules, flows)
    it.extra["q_value"] = q
    return it


def _loop(drv: _Driver, t_start: float) -> str:
    case, cfg, ledger = drv.case, drv.cfg, drv.ledger
    drv.bound_seconds = 0.0
    lam = init_multipliers(case)
    it = _iterate(drv, 0, lam, None)
    drv.history.append(it)
    if cfg.max_iters == 0:
        drv.best_lam = lam
        drv.snapshot(it)
        return ITERATION_LIMIT
    drv.exact_event(it)
    if it.g_norm == 0:
        ledger_update(ledger, qbar_candidate=it.L_tilde)
        drv.snapshot(it)
        return RELAXED_SATISFIED
    c_feas = ledger.feasible_cost_best
    if not math.isfinite(c_feas):
        # No feasible cost yet: assume a 5% gap above the first dual value.
        c_feas = it.L_tilde + 0.05 * max(1.0, abs(it.L_tilde))
    it.stepsize = cfg.alpha * max(c_feas - it.L_tilde, 1e-9) / it.g_norm ** 2
    drv.snapshot(it)

    tracker = BoundTracker(0, lam)
    prev = it
    k = 0
    while True:
        if ledger.quality <= cfg.quality_tol:
            return CONVERGED
        if k + 1 >= cfg.max_iters:
            return ITERATION_LIMIT
        if time.perf_counter() - t_start >= cfg.max_seconds:
            return TIME_LIMIT
        k += 1
        lam = update_multipliers(prev.multipliers, prev.stepsize, prev.g)
        event = tracker.push(k, lam, drv.history, ledger)
        drv.bound_seconds = tracker.seconds

        it = _iterate(drv, k, lam, prev)
        drv.history.append(it)
        L_prev = lagrangian(case, lam, prev.schedules, prev.flows)
        held = surrogate_condition_holds(it.L_tilde, L_prev)
        it.extra["surrogate_condition"] = held
        if k % cfg.exact_dual_every == 0 or not held:
            drv.exact_event(it)
        try:
            it.stepsize = stepsize_update(prev.stepsize, prev.g_norm, it.g_norm, k, cfg.M, cfg.rho)
        except ConvergenceSignal:
            if "q_exact" not in it.extra:
                drv.exact_event(it)
            ledger_update(ledger, qbar_candidate=it.L_tilde)
            it.stepsize = 0.0
            drv.snapshot(it, event)
            return RELAXED_SATISFIED
        drv.snapshot(it, event)
        prev = it
