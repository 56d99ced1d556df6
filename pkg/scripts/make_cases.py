"""Regenerate the bundled case files under src/chprice/data.

The 118-bus cases take topology, reactances, generator buses and capacities,
and the per-bus load split from pypower's case118 (``pip install pypower``,
needed only to run this script). Everything else is synthetic and seeded:
unit cost/ramp/min-up-down data by size class and a 24-hour load shape.

    python3 scripts/make_cases.py
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from pypower.case118 import case118
from scipy.optimize import linprog

OUT = Path(__file__).resolve().parents[1] / "src" / "chprice" / "data"
SEED = 118
PEAK_FRACTION = 0.72  # peak demand / installed capacity
# Weekday load shape, fraction of the daily peak.
SHAPE = np.array([0.67, 0.63, 0.60, 0.59, 0.59, 0.60, 0.74, 0.86, 0.95, 0.96, 0.96, 0.95,
                  0.95, 0.95, 0.93, 0.94, 0.99, 1.00, 1.00, 0.96, 0.91, 0.83, 0.73, 0.63])
# Tight lines in the transmission case: limit = factor * unconstrained peak flow.
TIGHT = {0: 0.85, 1: 0.9, 2: 0.9, 3: 0.95}


def example1() -> dict:
    demand = [100, 110, 130, 160, 200, 250, 300, 340, 370, 380, 380, 375,
              360, 340, 320, 300, 280, 260, 240, 220, 200, 180, 165, 150]
    common = dict(p_min=50.0, p_max=200.0, min_up=1, min_down=1, noload_cost=0.0,
                  init_on=False, init_dwell=1, init_power=0.0)
    return {
        "horizon": 24,
        "mode": "system",
        "system_demand": demand,
        "units": [
            dict(id="1", ramp=200.6, startup_ramp=150.3, initial_ramp=150.3,
                 energy_cost=65.0, startup_cost=0.0, **common),
            dict(id="2", ramp=40.7, startup_ramp=70.35, initial_ramp=70.35,
                 energy_cost=40.0, startup_cost=6000.0, **common),
        ],
    }


def _units(rng, pmax, buses):
    units = []
    for k, (cap, bus) in enumerate(zip(pmax, buses)):
        if cap >= 300:
            lo, ce, cs, cn, ud, rr = 0.4, (12, 22), (1500, 4000), (200, 500), (5, 8), 0.3
        elif cap > 120:
            lo, ce, cs, cn, ud, rr = 0.3, (20, 35), (500, 1500), (100, 250), (3, 5), 0.5
        else:
            lo, ce, cs, cn, ud, rr = 0.2, (30, 60), (50, 300), (20, 100), (1, 2), 1.0
        p_min = round(lo * cap, 1)
        ramp = round(rr * cap, 1)
        up = int(rng.integers(ud[0], ud[1] + 1))
        units.append(dict(
            id=f"G{k + 1:02d}", bus=int(bus), p_min=p_min, p_max=float(cap),
            ramp=ramp, startup_ramp=round(max(p_min, min(cap, 0.5 * cap + 0.5 * ramp)), 1),
            initial_ramp=ramp, min_up=up, min_down=max(1, up - int(rng.integers(0, 2))),
            energy_cost=round(float(rng.uniform(*ce)), 2),
            startup_cost=round(float(rng.uniform(*cs)), 0),
            noload_cost=round(float(rng.uniform(*cn)), 0),
        ))
    return units


def _initial_state(units, d_prev):
    """Cheapest units covering 110% of the previous-hour load, loaded evenly."""
    order = sorted(range(len(units)), key=lambda i: (units[i]["energy_cost"], units[i]["id"]))
    on, cap = [], 0.0
    for i in order:
        if cap >= 1.1 * d_prev:
            break
        on.append(i)
        cap += units[i]["p_max"]
    lo = sum(units[i]["p_min"] for i in on)
    share = (d_prev - lo) / (cap - lo)
    for i, u in enumerate(units):
        if i in on:
            u.update(init_on=True, init_dwell=u["min_up"],
                     init_power=round(u["p_min"] + share * (u["p_max"] - u["p_min"]), 1))
        else:
            u.update(init_on=False, init_dwell=u["min_down"], init_power=0.0)


def _dc_flows(n_bus, lines, ref, injection):
    """Flows of a DC power flow for per-bus net injections (N, T)."""
    B = np.zeros((n_bus, n_bus))
    for ln in lines:
        s, r, y = ln["sending"], ln["receiving"], 1.0 / ln["reactance"]
        B[s, s] += y
        B[r, r] += y
        B[s, r] -= y
        B[r, s] -= y
    keep = [n for n in range(n_bus) if n != ref]
    theta = np.zeros_like(injection)
    theta[keep] = np.linalg.solve(B[np.ix_(keep, keep)], injection[keep])
    return np.array([(theta[ln["sending"]] - theta[ln["receiving"]]) / ln["reactance"] for ln in lines])


def _dispatch_all_on(units, demand):
    """Merit-order LP dispatch of every unit within its capacity, hour by hour."""
    c = np.array([u["energy_cost"] for u in units])
    bounds = [(0.0, u["p_max"]) for u in units]
    out = []
    for d in demand:
        res = linprog(c, A_eq=np.ones((1, len(units))), b_eq=[d], bounds=bounds, method="highs")
        out.append(res.x)
    return np.array(out).T


def ieee118():
    rng = np.random.default_rng(SEED)
    ppc = case118()
    bus_ids = ppc["bus"][:, 0].astype(int)
    index = {b: k for k, b in enumerate(bus_ids)}
    n_bus = len(bus_ids)
    lines = []
    for row in ppc["branch"]:
        lines.append(dict(sending=index[int(row[0])], receiving=index[int(row[1])],
                          reactance=float(row[3]), f_min=-9900.0, f_max=9900.0))
    ref = index[int(ppc["bus"][ppc["bus"][:, 1] == 3][0, 0])]
    gen = ppc["gen"]
    units = _units(rng, gen[:, 8], [index[int(b)] for b in gen[:, 0]])
    capacity = sum(u["p_max"] for u in units)
    demand = np.round(SHAPE * PEAK_FRACTION * capacity, 1)
    pd = ppc["bus"][:, 2].clip(min=0.0)
    nodal = np.round(np.outer(pd / pd.sum(), demand), 3)
    demand = nodal.sum(axis=0)
    _initial_state(units, float(demand[-1]))
    network = dict(bus_count=n_bus, reference_bus=ref, lines=lines, nodal_demand=nodal.tolist())
    base = dict(horizon=24, mode="system", units=units, network=network)

    # Transmission limits sized from the unconstrained merit-order flows.
    P = _dispatch_all_on(units, demand)
    inj = -nodal.copy()
    for i, u in enumerate(units):
        inj[u["bus"]] += P[i]
    peak = np.abs(_dc_flows(n_bus, lines, ref, inj)).max(axis=1)
    tx_lines = []
    ranked = np.argsort(-peak)
    for k, ln in enumerate(lines):
        rank = int(np.flatnonzero(ranked == k)[0])
        lim = TIGHT[rank] * peak[k] if rank in TIGHT else max(1.5 * peak[k], 100.0)
        tx_lines.append(dict(ln, f_min=-round(lim, 1), f_max=round(lim, 1)))
    tx = dict(base, mode="nodal", network=dict(network, lines=tx_lines))
    return base, tx


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    base, tx = ieee118()
    for name, doc in (("example1", example1()), ("ieee118", base), ("ieee118_tx", tx)):
        (OUT / f"{name}.json").write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
        print("wrote", OUT / f"{name}.json")


if __name__ == "__main__":
    main()
