"""Price-based self-scheduling of a single unit.

For fixed prices a unit minimizes its cost minus revenue over commitment,
start-up and dispatch, subject to capacity, minimum up/down time and ramp
limits. Because the start-up/shut-down ramp caps the first and last on-hour,
dispatch decouples across separate on-intervals, so the problem is solved
exactly as a shortest path over candidate on-intervals. Each interval's
dispatch is a ramp-constrained chain solved by propagating a convex
piecewise-linear value function hour by hour.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .case import UnitParams
from .lp import LE, LinearProgram, solve_lp
from .schedules import UnitSchedule

INF = float("inf")


class InfeasibleIntervalError(RuntimeError):
    """An on-interval admits no dispatch; indicates inconsistent unit data."""


@dataclass
class IntervalDispatch:
    start: int  # first on-hour, 0-based
    end: int  # last on-hour, inclusive
    p: np.ndarray
    value: float


# --- convex piecewise-linear value functions: parallel lists xs, ys ---------

def _interp(xs, ys, x):
    k = bisect_right(xs, x)
    if k == 0:
        return ys[0]
    if k >= len(xs):
        return ys[-1]
    x0, x1 = xs[k - 1], xs[k]
    return ys[k - 1] + (ys[k] - ys[k - 1]) * (x - x0) / (x1 - x0)


def _clip(xs, ys, lo, hi):
    a = max(lo, xs[0])
    b = min(hi, xs[-1])
    if a > b:
        return None, None
    if a == b:
        return [a], [_interp(xs, ys, a)]
    nx = [a]
    ny = [_interp(xs, ys, a)]
    for x, y in zip(xs, ys):
        if a < x < b:
            nx.append(x)
            ny.append(y)
    nx.append(b)
    ny.append(_interp(xs, ys, b))
    return nx, ny


def _argmin_span(ys):
    m = min(ys)
    i1 = ys.index(m)
    i2 = i1
    while i2 + 1 < len(ys) and ys[i2 + 1] == m:
        i2 += 1
    return i1, i2


def _dilate(xs, ys, r):
    """g(p) = min over |q - p| <= r of f(q), for convex f."""
    i1, i2 = _argmin_span(ys)
    nx = [x - r for x in xs[: i1 + 1]] + [x + r for x in xs[i2:]]
    ny = ys[: i1 + 1] + ys[i2:]
    return nx, ny


def _add_linear(xs, ys, c):
    return [y + c * x for x, y in zip(xs, ys)]


def _min_below(xs, ys, cap):
    """(min value, leftmost minimizer) of f over {p <= cap}."""
    if cap < xs[0]:
        return INF, None
    if cap < xs[-1]:
        xs, ys = _clip(xs, ys, xs[0], cap)
    i1, _ = _argmin_span(ys)
    return ys[i1], xs[i1]


def _start_domain(unit: UnitParams, starts_here: bool, initial_power: float | None):
    if starts_here:
        return unit.p_min, min(unit.p_max, unit.startup_ramp)
    lo = max(unit.p_min, initial_power - unit.initial_ramp)
    hi = min(unit.p_max, initial_power + unit.initial_ramp)
    return lo, hi


def _chain(unit: UnitParams, a: int, costs, starts_here: bool, initial_power):
    """Forward value functions from hour a. Yields (t, xs, ys)."""
    lo, hi = _start_domain(unit, starts_here, initial_power)
    if lo > hi:
        return
    xs = [lo, hi] if hi > lo else [lo]
    ys = [costs[a] * x for x in xs]
    yield a, xs, ys
    for t in range(a + 1, len(costs)):
        xs, ys = _dilate(xs, ys, unit.ramp)
        xs, ys = _clip(xs, ys, unit.p_min, unit.p_max)
        ys = _add_linear(xs, ys, costs[t])
        yield t, xs, ys


def _ramps_slack(unit: UnitParams) -> bool:
    """True when ramp limits can never bind, so hours decouple."""
    span = unit.p_max - unit.p_min
    ok = unit.ramp >= span and unit.startup_ramp >= unit.p_max
    if unit.init_on:
        ok = ok and unit.initial_ramp >= max(unit.p_max - unit.init_power,
                                             unit.init_power - unit.p_min)
    return ok


def dispatch_interval(unit: UnitParams, start: int, end: int, prices, starts_here: bool = True,
                      ends_here: bool = True, initial_power: float | None = None,
                      method: str = "chain") -> IntervalDispatch:
    """Cheapest dispatch of one on-interval [start, end] (0-based, inclusive).

    ``starts_here`` caps the first hour at the start-up ramp; otherwise the
    interval continues the initial state and the first hour must lie within
    ``initial_ramp`` of ``initial_power``. ``ends_here`` caps the last hour at
    the shut-down ramp. ``method="lp"`` solves the same problem with the LP
    kernel.
    """
    prices = np.asarray(prices, dtype=float)
    if not 0 <= start <= end < len(prices):
        raise ValueError("interval outside the horizon")
    if not starts_here and initial_power is None:
        raise ValueError("a carried-over interval needs the initial power")
    costs = (unit.energy_cost - prices).tolist()
    n = end - start + 1
    fixed = n * unit.noload_cost + (unit.startup_cost if starts_here else 0.0)
    if method == "lp":
        p = _dispatch_lp(unit, start, end, costs, starts_here, ends_here, initial_power)
    else:
        p = _dispatch_chain(unit, start, end, costs, starts_here, ends_here, initial_power)
    value = float(np.dot(costs[start:end + 1], p)) + fixed
    return IntervalDispatch(start, end, p, value)


def _dispatch_chain(unit, a, b, costs, starts_here, ends_here, initial_power):
    fns = []
    for t, xs, ys in _chain(unit, a, costs[: b + 1], starts_here, initial_power):
        fns.append((xs, ys))
    if not fns:
        raise InfeasibleIntervalError(f"unit {unit.id}: hour {a + 1} unreachable from initial power")
    xs, ys = fns[-1]
    cap = unit.startup_ramp if ends_here else INF
    val, pb = _min_below(xs, ys, cap)
    if pb is None:
        raise InfeasibleIntervalError(f"unit {unit.id}: cannot ramp below shut-down limit by hour {b + 1}")
    p = [pb]
    for xs, ys in reversed(fns[:-1]):
        nxt = p[-1]
        i1, _ = _argmin_span(ys)
        lo = max(nxt - unit.ramp, xs[0])
        hi = min(nxt + unit.ramp, xs[-1])
        p.append(min(max(xs[i1], lo), hi))
    return np.array(p[::-1])


def _dispatch_lp(unit, a, b, costs, starts_here, ends_here, initial_power):
    n = b - a + 1
    lo = np.full(n, unit.p_min)
    hi = np.full(n, unit.p_max)
    l0, h0 = _start_domain(unit, starts_here, initial_power)
    lo[0], hi[0] = l0, h0
    if ends_here:
        hi[-1] = min(hi[-1], unit.startup_ramp)
    if np.any(lo > hi):
        raise InfeasibleIntervalError(f"unit {unit.id}: empty dispatch box")
    lp = LinearProgram(np.asarray(costs[a: b + 1]), lo=lo, hi=hi)
    for k in range(n - 1):
        row = np.zeros(n)
        row[k + 1], row[k] = 1.0, -1.0
        lp.add(row, LE, unit.ramp)
        lp.add(-row, LE, unit.ramp)
    out = solve_lp(lp)
    if not out.optimal:
        raise InfeasibleIntervalError(f"unit {unit.id}: interval LP {out.status}")
    return out.x


def _interval_table(unit: UnitParams, a: int, costs, starts_here: bool, initial_power):
    """Energy values of [a, b] for every b >= a: (open-ended, shut-down-capped)."""
    T = len(costs)
    free = [INF] * T
    capped = [INF] * T
    if _ramps_slack(unit):
        lo, hi = unit.p_min, unit.p_max
        if not starts_here:
            lo0, hi0 = _start_domain(unit, False, initial_power)
        else:
            lo0, hi0 = lo, hi
        acc = 0.0
        for t in range(a, T):
            c = costs[t]
            l_, h_ = (lo0, hi0) if t == a else (lo, hi)
            acc += min(c * l_, c * h_)
            free[t] = capped[t] = acc
        return free, capped
    for t, xs, ys in _chain(unit, a, costs, starts_here, initial_power):
        i1, _ = _argmin_span(ys)
        free[t] = ys[i1]
        capped[t] = _min_below(xs, ys, unit.startup_ramp)[0]
    return free, capped


def _key(value, hours, starts):
    return (round(value, 6), hours, starts)


def best_response(unit: UnitParams, prices) -> tuple[UnitSchedule, float]:
    """Globally optimal self-schedule of ``unit`` against ``prices``.

    Returns the schedule and its value: total cost minus energy revenue.
    Exact ties are broken toward fewer on-hours, then earlier start-ups.
    """
    prices = np.asarray(prices, dtype=float)
    T = len(prices)
    costs = (unit.energy_cost - prices).tolist()
    L = unit.min_down
    l = unit.min_up
    cn, cs = unit.noload_cost, unit.startup_cost

    # A state is (value, on_hours, starts, intervals); intervals are
    # (a, b, starts_here) triples.
    best_total = None
    ready = [None] * (T + 1)  # best prefix allowing a start at hour a

    def offer(slot_list, idx, state):
        cur = slot_list[idx]
        if cur is None or _key(*state[:3]) < _key(*cur[:3]):
            slot_list[idx] = state

    finals = [None]
    ended = [None] * T  # best schedule whose last interval ends at b < T-1

    if unit.init_on:
        fon = unit.forced_on_until
        free, capped = _interval_table(unit, 0, costs, False, unit.init_power)
        if fon == 0 and unit.init_power <= unit.startup_ramp + 1e-12:
            st = (0.0, 0, (), ())
            offer(finals, 0, st)
            for a in range(L, T):
                offer(ready, a, st)
        for b in range(min(max(fon - 1, 0), T - 1), T):
            e = free[b] if b == T - 1 else capped[b]
            if e == INF:
                continue
            v = e + (b + 1) * cn
            st = (v, b + 1, (), ((0, b, False),))
            offer(finals, 0, st)
            if b < T - 1:
                offer(ended, b, st)
    else:
        st = (0.0, 0, (), ())
        offer(finals, 0, st)
        for a in range(unit.forced_off_until, T):
            offer(ready, a, st)

    run_best = None  # min over ended[b] with b <= a - 1 - L
    for a in range(T):
        j = a - 1 - L
        if j >= 0 and ended[j] is not None:
            if run_best is None or _key(*ended[j][:3]) < _key(*run_best[:3]):
                run_best = ended[j]
        if run_best is not None:
            offer(ready, a, run_best)
        pre = ready[a]
        if pre is None:
            continue
        free, capped = _interval_table(unit, a, costs, True, None)
        for b in range(a, T):
            if b < T - 1 and b - a + 1 < l:
                continue
            e = free[b] if b == T - 1 else capped[b]
            if e == INF:
                continue
            v = pre[0] + e + (b - a + 1) * cn + cs
            st = (v, pre[1] + b - a + 1, pre[2] + (a,), pre[3] + ((a, b, True),))
            offer(finals, 0, st)
            if b < T - 1:
                offer(ended, b, st)

    best = finals[0]
    x = np.zeros(T, dtype=int)
    p = np.zeros(T)
    for a, b, starts_here in best[3]:
        d = dispatch_interval(unit, a, b, prices, starts_here=starts_here,
                              ends_here=b < T - 1,
                              initial_power=None if starts_here else unit.init_power)
        x[a: b + 1] = 1
        p[a: b + 1] = d.p
    sched = UnitSchedule.from_commitment(unit, x, p)
    return sched, schedule_value(unit, sched, prices)


def schedule_value(unit: UnitParams, sched: UnitSchedule, prices) -> float:
    """Cost of the schedule minus its energy revenue at ``prices``."""
    return sched.cost(unit) - float(np.dot(prices, sched.p))


def improve(unit: UnitParams, prices, incumbent: UnitSchedule | None = None):
    """Return a schedule no worse than ``incumbent`` at ``prices``.

    Solved exactly; exact solves are cheap at the sizes handled here.
    """
    sched, value = best_response(unit, prices)
    if incumbent is not None:
        inc_value = schedule_value(unit, incumbent, prices)
        if inc_value < value:
            return incumbent, inc_value
    return sched, value
