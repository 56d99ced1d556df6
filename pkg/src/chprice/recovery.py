"""Feasible UC solutions built from relaxed-problem schedules.

The commitment taken from the dual iterate is repaired until every hour has
enough committed capacity (and not too much minimum output), then dispatched
by a system-wide LP. Dispatch runs with penalized balance slacks; any slack
left points at hours that need one more (or one fewer) committed unit, which
drives up to three repair retries.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .case import SYSTEM, CaseData, UnitParams, merit_order
from .lp import EQ, LE, LinearProgram, solve_lp
from .schedules import FlowState, UnitSchedule, solution_violations

log = logging.getLogger(__name__)

SLACK_TOL = 1e-6
MAX_RETRIES = 3


class IrreparableError(RuntimeError):
    """Demand exceeds the total installed capacity."""


@dataclass
class FeasibleSolution:
    schedules: list
    flows: FlowState | None
    cost: float
    feasible: bool
    commitment: np.ndarray


# --- commitment helpers ---------------------------------------------------

def _runs(row):
    T = len(row)
    s = 0
    for t in range(1, T + 1):
        if t == T or row[t] != row[s]:
            yield int(row[s]), s, t - 1
            s = t


def commitment_ok(unit: UnitParams, row) -> bool:
    """Min up/down and initial-condition feasibility of one commitment row."""
    T = len(row)
    init = 1 if unit.init_on else 0
    for val, a, b in _runs(row):
        length = b - a + 1 + (unit.init_dwell if a == 0 and val == init else 0)
        need = unit.min_up if val else unit.min_down
        if b < T - 1 and length < need:
            return False
    if row[0] != init:
        if unit.init_dwell < (unit.min_up if init else unit.min_down):
            return False
        if init and unit.init_power > unit.startup_ramp:
            return False
    return True


def _fill_short_gaps(unit: UnitParams, row):
    """Close interior off-runs shorter than the minimum down time."""
    row = row.copy()
    T = len(row)
    for val, a, b in list(_runs(row)):
        if val == 0 and b < T - 1:
            length = b - a + 1 + (unit.init_dwell if a == 0 and not unit.init_on else 0)
            if a == 0 and not unit.init_on:
                continue
            if length < unit.min_down:
                row[a: b + 1] = 1
    return row


def _turn_on(unit: UnitParams, row, t):
    T = len(row)
    new = row.copy()
    new[t: min(T, t + unit.min_up)] = 1
    new = _fill_short_gaps(unit, new)
    return new if commitment_ok(unit, new) else None


def _removals(unit: UnitParams, row, t):
    """Candidate rows with hour t switched off: whole run, tail, then head."""
    T = len(row)
    for val, a, b in _runs(row):
        if val == 1 and a <= t <= b:
            break
    else:
        return
    for lo, hi in ((a, b), (t, b), (a, t)):
        new = row.copy()
        new[lo: hi + 1] = 0
        if commitment_ok(unit, new):
            yield new


def _effective_caps(units, X):
    """Per-hour max output, with start-up/shut-down hours capped by the start-up ramp."""
    I, T = X.shape
    caps = np.zeros((I, T))
    for i, u in enumerate(units):
        prev = np.concatenate([[1 if u.init_on else 0], X[i, :-1]])
        nxt = np.concatenate([X[i, 1:], [1]])
        edge = (prev == 0) | (nxt == 0)
        caps[i] = X[i] * np.where(edge, min(u.p_max, u.startup_ramp), u.p_max)
    return caps


def commit_repair(case: CaseData, schedules, margin=None) -> np.ndarray:
    """Commitment meeting per-hour capacity bounds, built from ``schedules``.

    ``margin`` (MW per hour) raises the capacity target above demand.
    """
    units = case.units
    T = case.horizon
    X = np.array([s.x for s in schedules], dtype=int)
    D = case.total_demand
    total = sum(u.p_max for u in units)
    short = np.flatnonzero(D > total + 1e-9)
    if short.size:
        raise IrreparableError(f"demand {D[short[0]]:g} MW at hour {short[0] + 1} exceeds capacity {total:g} MW")
    target = D + (np.zeros(T) if margin is None else np.asarray(margin, dtype=float))
    index = {u.id: i for i, u in enumerate(units)}
    order = [index[u.id] for u in merit_order(case)]
    pmin = np.array([u.p_min for u in units])

    for t in range(T):
        while _effective_caps(units, X)[:, t].sum() < target[t] - 1e-9:
            for i in order:
                if X[i, t]:
                    continue
                new = _turn_on(units[i], X[i], t)
                if new is not None:
                    X[i] = new
                    break
            else:
                break

    for t in range(T):
        for i in reversed(order):
            if (pmin * X[:, t]).sum() <= D[t] + 1e-9:
                break
            if not X[i, t]:
                continue
            for new in _removals(units[i], X[i], t):
                trial = X.copy()
                trial[i] = new
                hours = np.flatnonzero(new != X[i])
                caps = _effective_caps(units, trial)
                if np.all(caps[:, hours].sum(axis=0) >= D[hours] - 1e-9):
                    X = trial
                    break
    return X


# --- dispatch -------------------------------------------------------------

def _dispatch_lp(case: CaseData, X: np.ndarray, penalty: float):
    """LP over p (I*T), then per nodal mode f (L*T) and theta (N*T), then slacks."""
    units = case.units
    I, T = X.shape
    nP = I * T
    nodal = case.mode != SYSTEM
    if nodal:
        net = case.network
        N, L = net.bus_count, len(net.lines)
        nF, nTh = L * T, N * T
        nB = N * T
    else:
        nF = nTh = 0
        nB = T
    nS = 2 * nB
    nvar = nP + nF + nTh + nS
    pid = lambda i, t: i * T + t  # noqa: E731

    lo = np.zeros(nvar)
    hi = np.full(nvar, np.inf)
    c = np.zeros(nvar)
    for i, u in enumerate(units):
        for t in range(T):
            k = pid(i, t)
            c[k] = u.energy_cost
            if X[i, t]:
                lo[k], hi[k] = u.p_min, u.p_max
                prev_on = X[i, t - 1] if t else (1 if u.init_on else 0)
                if not prev_on:
                    hi[k] = min(hi[k], u.startup_ramp)
                if t + 1 < T and not X[i, t + 1]:
                    hi[k] = min(hi[k], u.startup_ramp)
                if t == 0 and u.init_on:
                    lo[k] = max(lo[k], u.init_power - u.initial_ramp)
                    hi[k] = min(hi[k], u.init_power + u.initial_ramp)
            else:
                hi[k] = 0.0
    c[nP + nF + nTh:] = penalty

    rows, cols, vals, rhs, senses = [], [], [], [], []
    r = 0

    def put(entries, sense, b):
        nonlocal r
        for col, val in entries:
            rows.append(r)
            cols.append(col)
            vals.append(val)
        senses.append(sense)
        rhs.append(b)
        r += 1

    for i, u in enumerate(units):
        for t in range(1, T):
            if X[i, t] and X[i, t - 1]:
                put([(pid(i, t), 1.0), (pid(i, t - 1), -1.0)], LE, u.ramp)
                put([(pid(i, t - 1), 1.0), (pid(i, t), -1.0)], LE, u.ramp)

    s0 = nP + nF + nTh
    if not nodal:
        for t in range(T):
            put([(pid(i, t), 1.0) for i in range(I)] + [(s0 + t, 1.0), (s0 + nB + t, -1.0)],
                EQ, case.system_demand[t])
    else:
        fid = lambda l, t: nP + l * T + t  # noqa: E731
        tid = lambda n, t: nP + nF + n * T + t  # noqa: E731
        for l, ln in enumerate(net.lines):
            for t in range(T):
                k = fid(l, t)
                lo[k], hi[k] = ln.f_min, ln.f_max
                put([(k, 1.0), (tid(ln.sending, t), -1.0 / ln.reactance),
                     (tid(ln.receiving, t), 1.0 / ln.reactance)], EQ, 0.0)
        for n in range(N):
            for t in range(T):
                k = tid(n, t)
                if n == net.reference_bus:
                    lo[k] = hi[k] = 0.0
                else:
                    lo[k] = -np.inf
        at_bus = [[] for _ in range(N)]
        for i, u in enumerate(units):
            at_bus[u.bus].append(i)
        into = [[] for _ in range(N)]
        out_of = [[] for _ in range(N)]
        for l, ln in enumerate(net.lines):
            into[ln.receiving].append(l)
            out_of[ln.sending].append(l)
        for n in range(N):
            for t in range(T):
                e = [(pid(i, t), 1.0) for i in at_bus[n]]
                e += [(fid(l, t), 1.0) for l in into[n]]
                e += [(fid(l, t), -1.0) for l in out_of[n]]
                j = n * T + t
                e += [(s0 + j, 1.0), (s0 + nB + j, -1.0)]
                put(e, EQ, net.nodal_demand[n, t])

    A = sp.csr_matrix((vals, (rows, cols)), shape=(r, nvar))
    lp = LinearProgram(c, lo=lo, hi=hi, A=A, senses=senses, rhs=np.array(rhs))
    backend = "simplex" if nvar <= 200 else "highs"
    if backend == "simplex":
        lp.A = A.toarray()
    return lp, backend, (nP, nF, nTh, nB)


def economic_dispatch(case: CaseData, X: np.ndarray):
    """Dispatch a fixed commitment.

    Returns (FeasibleSolution, shortage, surplus) where shortage/surplus are
    the leftover balance slacks, shaped (T,) summed over buses.
    """
    units = case.units
    I, T = X.shape
    penalty = 1e3 * max(1.0, max(u.energy_cost for u in units))
    lp, backend, (nP, nF, nTh, nB) = _dispatch_lp(case, X, penalty)
    out = solve_lp(lp, backend=backend)
    if not out.optimal:
        raise RuntimeError(f"dispatch LP {out.status}")
    x = out.x
    P = x[:nP].reshape(I, T)
    P = np.where(X == 1, P, 0.0)
    flows = None
    if case.mode != SYSTEM:
        net = case.network
        L, N = len(net.lines), net.bus_count
        theta = x[nP + nF: nP + nF + nTh].reshape(N, T)
        theta[net.reference_bus] = 0.0
        f = x[nP: nP + nF].reshape(L, T)
        flows = FlowState(theta, f)
    s0 = nP + nF + nTh
    short = x[s0: s0 + nB]
    surplus = x[s0 + nB: s0 + 2 * nB]
    if case.mode != SYSTEM:
        short = short.reshape(-1, T).sum(axis=0)
        surplus = surplus.reshape(-1, T).sum(axis=0)
    schedules = [UnitSchedule.from_commitment(u, X[i], P[i]) for i, u in enumerate(units)]
    cost = float(sum(s.cost(u) for u, s in zip(units, schedules)))
    ok = bool(short.max(initial=0) <= SLACK_TOL and surplus.max(initial=0) <= SLACK_TOL)
    if ok:
        ok = not solution_violations(case, schedules, flows)
    return FeasibleSolution(schedules, flows, cost, ok, X.copy()), short, surplus


def recover(case: CaseData, schedules, cache: dict | None = None) -> FeasibleSolution | None:
    """Repair, dispatch, and retry; None if no feasible dispatch was found."""
    units = case.units
    T = case.horizon
    X = commit_repair(case, schedules)
    index = {u.id: i for i, u in enumerate(units)}
    order = [index[u.id] for u in merit_order(case)]
    added = np.zeros(X.shape, dtype=bool)
    for attempt in range(MAX_RETRIES + 1):
        key = X.tobytes()
        if cache is not None and key in cache:
            sol, short, surplus = cache[key]
        else:
            sol, short, surplus = economic_dispatch(case, X)
            if cache is not None:
                cache[key] = (sol, short, surplus)
        if sol.feasible:
            return sol
        if attempt == MAX_RETRIES:
            break
        # One more merit-order unit where short; one fewer where long, but
        # only once nothing is short and never undoing an earlier addition.
        before = X
        X = X.copy()
        for t in np.flatnonzero(short > SLACK_TOL):
            for i in order:
                if not X[i, t]:
                    new = _turn_on(units[i], X[i], t)
                    if new is not None:
                        X[i] = new
                        break
        added |= X > before
        if short.max(initial=0) > SLACK_TOL:
            continue
        for t in np.flatnonzero(surplus > SLACK_TOL):
            for i in reversed(order):
                if X[i, t]:
                    new = next((r for r in _removals(units[i], X[i], t)
                                if not np.any(added[i] & (r == 0))), None)
                    if new is not None:
                        X[i] = new
                        break
    log.info("no feasible dispatch after %d retries", MAX_RETRIES)
    return None
