import math
from types import SimpleNamespace

import numpy as np
import pytest

from chprice.bounds import (INFEASIBLE, OPEN, BoundsLedger, BoundTracker, DivergenceWindow,
                            divergence_row, ledger_update, window_bound, window_extend,
                            window_reset)


def grow(points, k0=0):
    w = DivergenceWindow.start(k0, np.atleast_1d(points[0]))
    for p in points[1:]:
        window_extend(w, np.atleast_1d(p))
    return w


def rec(s, g2, L):
    return SimpleNamespace(stepsize=s, g_norm=math.sqrt(g2), L_tilde=L)


def test_row_expansion():
    a, b = divergence_row([0.0], [1.0])
    assert a == pytest.approx([-2.0]) and b == pytest.approx(-1.0)


def test_window_examples():
    w = grow([0.0, 1.0, 0.5])
    assert w.status == OPEN
    w = grow([0.0, 1.0, -1.0])
    assert w.status == INFEASIBLE
    w = grow([[3.0, 4.0], [3.0, 4.0], [3.0, 4.0]])
    assert w.status == OPEN
    assert len(w.rows) == w.length == 2


def test_extend_closed_window_rejected():
    w = grow([0.0, 1.0, -1.0])
    with pytest.raises(ValueError):
        window_extend(w, [0.0])
    w = grow([0.0, 1.0])
    with pytest.raises(ValueError):
        window_extend(w, [0.0, 1.0])


def test_bound_examples():
    w = grow([0.0, 1.0, -1.0])
    hist = {0: rec(0.1, 400.0, 3500.0), 1: rec(0.1, 100.0, 3500.0)}
    assert window_bound(w, hist) == pytest.approx(3540.0)
    hist = {0: rec(0.1, 400.0, 3500.0), 1: rec(0.0, 100.0, 3510.0)}
    assert window_bound(w, hist) == pytest.approx(3540.0)
    hist = {0: rec(0.0, 400.0, 3500.0), 1: rec(0.0, 100.0, 3400.0)}
    assert window_bound(w, hist) == pytest.approx(3500.0)
    with pytest.raises(KeyError):
        window_bound(w, {0: rec(0.1, 400.0, 3500.0)})
    with pytest.raises(ValueError):
        window_bound(grow([0.0, 1.0]), hist)


def test_reset_anchor():
    w = DivergenceWindow.start(5, [0.0])
    for k, v in zip(range(6, 10), [1.0, 2.0, 3.0, 4.0]):
        window_extend(w, [v], k)
    fresh = window_reset(w)
    assert fresh.anchor == 9 and fresh.length == 0
    assert fresh.iterates[0] == pytest.approx([4.0])


def test_back_to_back_closures_advance_by_one():
    ledger = BoundsLedger(q_best=0.0)
    hist = [rec(0.1, 1.0, 1.0) for _ in range(8)]
    seq = [0.0, 1.0, -1.0, 2.0, -3.0]
    tr = BoundTracker(0, [seq[0]])
    anchors = []
    for k, v in enumerate(seq[1:], start=1):
        ev = tr.push(k, [v], hist, ledger)
        if ev is not None:
            anchors.append(ev.anchor)
    assert anchors == [0, 2]  # a single row is never empty, so windows need two steps
    assert tr.window.anchor == 4


def test_ledger_examples():
    led = ledger_update(BoundsLedger(), q_candidate=9990.0, qbar_candidate=10000.0)
    assert led.quality == pytest.approx(0.001)
    before = led.qbar_best
    ledger_update(led, qbar_candidate=led.q_best - 1)
    assert led.qbar_best == before and led.rejected == [led.q_best - 1]
    ledger_update(led, cfeas_candidate=11000.0)
    assert led.duality_gap == pytest.approx(1010.0 / 11000.0)
    assert BoundsLedger().quality == math.inf and BoundsLedger().duality_gap == math.inf


def test_ledger_monotone():
    rng = np.random.default_rng(0)
    led = BoundsLedger()
    qs, qbars = [], []
    for _ in range(200):
        ledger_update(led, q_candidate=rng.normal(0, 10),
                      qbar_candidate=rng.normal(20, 10), cfeas_candidate=rng.normal(30, 10))
        qs.append(led.q_best)
        qbars.append(led.qbar_best)
        if math.isfinite(led.qbar_best) and led.qbar_best >= led.q_best:
            assert led.quality >= 0
    assert np.all(np.diff(qs) >= 0)
    assert np.all(np.diff([q for q in qbars if math.isfinite(q)]) <= 0)


def test_high_dimensional_zigzag_closes():
    rng = np.random.default_rng(3)
    d = 40
    lam = rng.normal(size=d)
    w = DivergenceWindow.start(0, lam)
    # constant-length steps bouncing around a point never settle on it
    for _ in range(200):
        lam = lam - 2.0 * lam / max(np.linalg.norm(lam), 1e-12) + 0.05 * rng.normal(size=d)
        window_extend(w, lam)
        if w.status == INFEASIBLE:
            break
    assert w.status == INFEASIBLE


def test_long_window_closes_within_a_tenth():
    w = DivergenceWindow.start(0, [0.0, 0.0])
    for k in range(1, 61):
        window_extend(w, [float(k), 0.0])
    assert w.status == OPEN
    extra = 0
    while w.status == OPEN:
        extra += 1
        window_extend(w, [-100.0 - extra, 0.0])  # any point now fails an early row
    assert extra <= 1 + w.length // 10
