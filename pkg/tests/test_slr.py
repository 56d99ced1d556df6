import math

import numpy as np
import pytest

from chprice.case import bundled_case, case_from_dict
from chprice.slr import (ITERATION_LIMIT, RELAXED_SATISFIED, ConvergenceSignal, SlrConfig,
                         init_multipliers, run, stepsize_update, update_multipliers)


def unit(**kw):
    d = dict(id="u", p_min=0.0, p_max=100.0, ramp=100.0, startup_ramp=100.0, initial_ramp=100.0,
             min_up=1, min_down=1, energy_cost=40.0, startup_cost=0.0, noload_cost=0.0,
             init_on=False, init_dwell=1, init_power=0.0)
    d.update(kw)
    return d


def system(units, demand):
    return case_from_dict({"horizon": len(demand), "mode": "system", "units": units,
                           "system_demand": list(demand)})


def test_stepsize_examples():
    assert stepsize_update(0.1, 1.0, 1.0, 1, 2.0, 0.5) == pytest.approx(0.05)
    assert stepsize_update(0.1, 1.0, 1.0, 16, 2.0, 0.5) == pytest.approx(0.09375)
    a = stepsize_update(0.1, 2.0, 1.0, 5, 20.0, 0.5)
    b = stepsize_update(0.1, 1.0, 1.0, 5, 20.0, 0.5)
    assert a == pytest.approx(2 * b)
    with pytest.raises(ConvergenceSignal):
        stepsize_update(0.1, 1.0, 0.0, 3, 20.0, 0.5)
    with pytest.raises(ValueError):
        stepsize_update(0.1, 1.0, 1.0, 0, 20.0, 0.5)


def test_update_examples():
    assert update_multipliers([30.0], 0.0, [20.0]) == pytest.approx([30.0])
    assert update_multipliers([30.0], 0.1, [20.0]) == pytest.approx([32.0])
    rng = np.random.default_rng(0)
    lam, g = rng.normal(size=(2, 4, 3))
    assert update_multipliers(lam, 0.3, g).ravel() == pytest.approx(
        update_multipliers(lam.ravel(), 0.3, g.ravel()))
    with pytest.raises(ValueError):
        update_multipliers([1.0, 2.0], 0.1, [1.0])


def test_init_examples():
    ex = bundled_case("example1")
    lam = init_multipliers(ex)
    assert lam[0] == 40.0  # 100 MW: unit 2 alone
    assert lam[list(ex.system_demand).index(380.0)] == 65.0
    c = system([unit(id="a", energy_cost=30.0), unit(id="b", energy_cost=50.0)], [0.0, 150.0, 500.0])
    assert list(init_multipliers(c)) == [30.0, 50.0, 50.0]
    tx = bundled_case("ieee118_tx")
    lam = init_multipliers(tx)
    assert lam.shape == (118, 24)
    assert np.all(lam == lam[0]) and lam[0] == pytest.approx(init_multipliers(tx.as_system()))


def test_config_validation():
    for kw in (dict(M=1.0), dict(rho=1.0), dict(alpha=0.0), dict(quality_tol=0.0),
               dict(exact_dual_every=0), dict(worker_count=0)):
        with pytest.raises(ValueError):
            SlrConfig(**kw)


def test_empty_run():
    r = run(bundled_case("example1"), SlrConfig(max_iters=0))
    assert r.status == ITERATION_LIMIT and r.limit_hit
    assert r.quality == math.inf and len(r.history) == 1


def test_fixed_point():
    c = system([unit(p_min=100.0, init_on=True, init_power=100.0, init_dwell=0, min_up=3)],
               [100.0] * 3)
    r = run(c, SlrConfig())
    assert r.status == RELAXED_SATISFIED
    assert r.quality == 0
    assert len(r.history) == 1


@pytest.fixture(scope="module")
def example_run():
    return run(bundled_case("example1"), SlrConfig(max_iters=400))


def test_example1_quality(example_run):
    r = example_run
    assert r.quality <= 0.005
    assert r.quality < r.duality_gap


def test_best_dual_monotone(example_run):
    qs = [it.extra["q_best"] for it in example_run.history]
    assert np.all(np.diff(qs) >= 0)
    exact = [it.extra["q_exact"] for it in example_run.history if "q_exact" in it.extra]
    assert max(exact) == pytest.approx(example_run.ledger.q_best)


def test_prices_are_best_dual(example_run):
    r = example_run
    best = max((it for it in r.history if "q_exact" in it.extra), key=lambda it: it.extra["q_exact"])
    assert np.array_equal(r.prices, best.multipliers)


def test_deterministic():
    c = bundled_case("example1")
    a = run(c, SlrConfig(max_iters=30))
    b = run(c, SlrConfig(max_iters=30))
    assert [it.L_tilde for it in a.history] == [it.L_tilde for it in b.history]
    assert all(np.array_equal(x.multipliers, y.multipliers) for x, y in zip(a.history, b.history))


def test_workers_do_not_change_history():
    c = bundled_case("example1")
    a = run(c, SlrConfig(max_iters=10))
    b = run(c, SlrConfig(max_iters=10, worker_count=2))
    assert [it.L_tilde for it in a.history] == [it.L_tilde for it in b.history]
