import json

import numpy as np
import pytest

from chprice.case import (NODAL, SYSTEM, CaseError, bundled_case, case_from_dict, case_to_dict,
                          dump_case, load_case, merit_order)


def unit(**kw):
    d = dict(id="u", p_min=50.0, p_max=200.0, ramp=100.0, startup_ramp=100.0, initial_ramp=100.0,
             min_up=1, min_down=1, energy_cost=40.0, startup_cost=0.0, noload_cost=0.0,
             init_on=False, init_dwell=1, init_power=0.0)
    d.update(kw)
    return d


def doc(units, demand=(100.0,)):
    return {"horizon": len(demand), "mode": "system", "units": units, "system_demand": list(demand)}


def test_example1_loads():
    case = bundled_case("example1")
    assert len(case.units) == 2 and case.horizon == 24 and case.mode == SYSTEM
    u1, u2 = case.units
    assert (u1.p_min, u1.p_max, u1.energy_cost, u1.startup_cost) == (50, 200, 65, 0)
    assert (u1.ramp, u1.initial_ramp) == (200.6, 150.3)
    assert (u2.energy_cost, u2.startup_cost, u2.ramp, u2.initial_ramp) == (40, 6000, 40.7, 70.35)


def test_ieee118_cases_load():
    base = bundled_case("ieee118")
    tx = bundled_case("ieee118_tx.json")
    assert len(base.units) == 54 and base.horizon == 24 and base.mode == SYSTEM
    assert len(tx.units) == 54 and tx.horizon == 24 and tx.mode == NODAL
    assert tx.network.bus_count == 118 and len(tx.network.lines) == 186
    assert np.allclose(base.total_demand, tx.total_demand)


def test_never_start_rejected():
    with pytest.raises(CaseError, match="unit can never start"):
        case_from_dict(doc([unit(startup_ramp=40.0)]))


@pytest.mark.parametrize("field,value,msg", [
    ("p_min", 300.0, "p_min <= p_max"),
    ("min_up", 0, "min_up >= 1"),
    ("startup_cost", -1.0, "nonnegative"),
    ("init_power", 10.0, "init_power == 0"),
])
def test_invariants_named(field, value, msg):
    with pytest.raises(CaseError, match=msg) as info:
        case_from_dict(doc([unit(**{field: value})]))
    assert "unit u" in str(info.value)


def test_parse_error_location():
    with pytest.raises(CaseError, match="line 2"):
        load_case('{"horizon": 1,\n "units": [,]}')


def test_unknown_field():
    with pytest.raises(CaseError, match="unknown fields"):
        case_from_dict(doc([unit(colour="red")]))


def test_disconnected_network_rejected():
    d = doc([unit(bus=0)])
    d["mode"] = "nodal"
    d["network"] = {"bus_count": 3, "reference_bus": 0, "nodal_demand": [[0.0], [50.0], [50.0]],
                    "lines": [{"sending": 0, "receiving": 1, "reactance": 0.1, "f_min": -50, "f_max": 50}]}
    with pytest.raises(CaseError, match="connected"):
        case_from_dict(d)


def test_capacity_warning():
    case = case_from_dict(doc([unit()], demand=(500.0,)))
    assert case.warnings and "exceeds total capacity" in case.warnings[0]


def test_merit_order():
    case = bundled_case("example1")
    assert [u.id for u in merit_order(case)] == ["2", "1"]
    single = case_from_dict(doc([unit(id="x")]))
    assert [u.id for u in merit_order(single)] == ["x"]
    tie = case_from_dict(doc([unit(id="b"), unit(id="a")]))
    assert [u.id for u in merit_order(tie)] == ["a", "b"]


@pytest.mark.parametrize("name", ["example1", "ieee118", "ieee118_tx"])
def test_round_trip(name):
    case = bundled_case(name)
    again = load_case(dump_case(case), name)
    assert case_to_dict(again) == case_to_dict(case)
    assert json.loads(dump_case(again)) == json.loads(dump_case(case))
    # every accepted case passes a fresh validation pass
    assert again.violations() == []
    assert all(u.violations() == [] for u in again.units)


def test_forced_prefixes():
    case = case_from_dict(doc([unit(init_on=True, init_power=100.0, init_dwell=1, min_up=4)]))
    assert case.units[0].forced_on_until == 3
    case = case_from_dict(doc([unit(init_dwell=0, min_down=3)]))
    assert case.units[0].forced_off_until == 3
