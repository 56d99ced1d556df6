import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chprice.case import UnitParams
from chprice.schedules import UnitSchedule, unit_violations
from chprice.unit import best_response, dispatch_interval, improve, schedule_value

from oracles import brute_best_response, commitment_ok


def mk(**kw):
    d = dict(id="u", p_min=50.0, p_max=200.0, ramp=40.7, startup_ramp=70.35, initial_ramp=70.35,
             min_up=1, min_down=1, energy_cost=40.0, startup_cost=0.0, noload_cost=0.0,
             init_on=False, init_dwell=1, init_power=0.0)
    d.update(kw)
    return UnitParams(**d)


def random_unit(rng, T):
    p_min = float(rng.integers(0, 40))
    p_max = p_min + float(rng.integers(5, 80))
    init_on = bool(rng.integers(0, 2))
    return UnitParams(
        id="r", p_min=p_min, p_max=p_max,
        ramp=float(rng.integers(1, 60)),
        startup_ramp=float(rng.integers(int(p_min), int(p_max) + 1)),
        initial_ramp=float(rng.integers(1, 60)),
        min_up=int(rng.integers(1, T + 1)), min_down=int(rng.integers(1, T + 1)),
        energy_cost=float(rng.integers(10, 40)), startup_cost=float(rng.integers(0, 300)),
        noload_cost=float(rng.integers(0, 50)),
        init_on=init_on, init_dwell=int(rng.integers(0, 4)),
        init_power=float(rng.integers(int(p_min), int(p_max) + 1)) if init_on else 0.0,
    )


def test_single_hour_clip():
    u = mk(noload_cost=7.0, startup_cost=11.0)
    d = dispatch_interval(u, 0, 0, [55.0])
    assert d.p[0] == pytest.approx(70.35)
    assert d.value == pytest.approx(-(55 - 40) * 70.35 + 7 + 11)


def test_degenerate_prices():
    u = mk(noload_cost=3.0)
    d = dispatch_interval(u, 0, 3, [40.0] * 4)
    assert d.value == pytest.approx(4 * 3.0)


def test_staircase():
    u = mk()
    d = dispatch_interval(u, 0, 2, [45.0] * 3, ends_here=False)
    assert d.p == pytest.approx([70.35, 111.05, 151.75])
    both = dispatch_interval(u, 0, 2, [45.0] * 3, method="lp", ends_here=False)
    assert both.value == pytest.approx(d.value)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 100_000))
def test_chain_matches_lp(seed):
    rng = np.random.default_rng(seed)
    T = int(rng.integers(1, 12))
    u = random_unit(rng, T)
    prices = rng.uniform(0, 80, T)
    a = int(rng.integers(0, T))
    b = int(rng.integers(a, T))
    carry = a == 0 and u.init_on and bool(rng.integers(0, 2))
    kw = dict(starts_here=not carry, ends_here=bool(rng.integers(0, 2)),
              initial_power=u.init_power if carry else None)
    try:
        c = dispatch_interval(u, a, b, prices, **kw)
    except RuntimeError:
        with pytest.raises(RuntimeError):
            dispatch_interval(u, a, b, prices, method="lp", **kw)
        return
    lp = dispatch_interval(u, a, b, prices, method="lp", **kw)
    assert c.value == pytest.approx(lp.value, rel=1e-9, abs=1e-6)


def test_no_profitable_hour():
    u = mk()
    s, v = best_response(u, np.full(24, 30.0))
    assert s.on_hours == 0 and v == 0


def test_hourly_decomposition():
    u = mk(ramp=500.0, startup_ramp=200.0, noload_cost=100.0)
    prices = np.array([39.0, 41.0, 45.0, 60.0])
    s, _ = best_response(u, prices)
    expect = (prices - 40.0) * 200.0 - 100.0 > 0
    assert np.array_equal(s.x, expect.astype(int))


def test_forced_prefix_honoured():
    u = mk(init_on=True, init_power=100.0, init_dwell=0, min_up=3)
    s, _ = best_response(u, np.full(6, 0.0))
    assert list(s.x[:3]) == [1, 1, 1] and s.x[3:].sum() == 0


def test_matches_enumeration_small():
    rng = np.random.default_rng(7)
    for _ in range(40):
        T = int(rng.integers(1, 5))
        u = random_unit(rng, T)
        prices = rng.integers(0, 70, T).astype(float)
        s, v = best_response(u, prices)
        assert not unit_violations(u, s)
        assert v == pytest.approx(brute_best_response(u, prices), abs=1e-6)
        assert v == pytest.approx(schedule_value(u, s, prices), abs=1e-6)


def _random_feasible_schedule(u, T, rng):
    """A feasible schedule by rejection over commitments plus the interval solver."""
    while True:
        x = rng.integers(0, 2, T)
        if not commitment_ok(u, x):
            continue
        if not u.init_on or x[0]:
            break
        if u.init_power <= u.startup_ramp:
            break
    p = np.zeros(T)
    prices = rng.uniform(0, 80, T)
    t = 0
    while t < T:
        if not x[t]:
            t += 1
            continue
        b = t
        while b + 1 < T and x[b + 1]:
            b += 1
        carry = t == 0 and u.init_on
        d = dispatch_interval(u, t, b, prices, starts_here=not carry, ends_here=b < T - 1,
                              initial_power=u.init_power if carry else None)
        p[t:b + 1] = d.p
        t = b + 1
    return UnitSchedule.from_commitment(u, x, p)


def test_lower_envelope():
    rng = np.random.default_rng(11)
    u = mk(min_up=2, min_down=2, startup_cost=500.0, noload_cost=20.0)
    T = 8
    prices = rng.uniform(20, 70, T)
    _, v = best_response(u, prices)
    for _ in range(100):
        s = _random_feasible_schedule(u, T, rng)
        assert not unit_violations(u, s)
        assert schedule_value(u, s, prices) >= v - 1e-6


def test_monotone_in_prices():
    rng = np.random.default_rng(5)
    u = mk(min_up=3, min_down=2, startup_cost=800.0)
    for _ in range(20):
        prices = rng.uniform(20, 70, 12)
        _, v1 = best_response(u, prices)
        _, v2 = best_response(u, prices + rng.uniform(0, 5, 12))
        assert v2 <= v1 + 1e-9


def test_improve():
    u = mk(startup_cost=100.0)
    prices = np.array([30.0, 80.0, 80.0, 30.0])
    best, v = best_response(u, prices)
    s, w = improve(u, prices, best)
    assert w == pytest.approx(v)
    s, w = improve(u, prices, UnitSchedule.off(4))
    assert w < 0
    rng = np.random.default_rng(2)
    for _ in range(30):
        inc = _random_feasible_schedule(u, 4, rng)
        _, w = improve(u, prices, inc)
        assert w <= schedule_value(u, inc, prices) + 1e-9


def test_carry_over_shutdown_allowed_only_below_startup_ramp():
    u = mk(init_on=True, init_power=180.0, init_dwell=5)
    s, _ = best_response(u, np.zeros(3))
    assert s.x[0] == 1  # 180 MW cannot drop to zero in one hour (V = 70.35)
    u = mk(init_on=True, init_power=60.0, init_dwell=5)
    s, _ = best_response(u, np.zeros(3))
    assert s.x.sum() == 0
