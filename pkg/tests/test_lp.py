import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chprice.lp import EQ, GE, LE, LinearProgram, NumericalInstabilityError, feasible, feasible_point, solve_lp


def test_box_minimum():
    lp = LinearProgram([1.0], lo=[-np.inf], hi=[np.inf])
    lp.add([1.0], GE, 3)
    lp.add([1.0], LE, 10)
    out = solve_lp(lp)
    assert out.optimal
    assert out.x[0] == pytest.approx(3)
    assert out.value == pytest.approx(3)


def test_empty_box_is_infeasible():
    lp = LinearProgram([0.0], lo=[-np.inf], hi=[np.inf])
    lp.add([1.0], LE, 1)
    lp.add([1.0], GE, 2)
    assert solve_lp(lp).status == "infeasible"


def test_simplex_corner():
    lp = LinearProgram([-1.0, -1.0], lo=[0, 0], hi=[1, 1])
    lp.add([1, 1], LE, 1)
    assert solve_lp(lp).value == pytest.approx(-1)


def test_unbounded():
    lp = LinearProgram([-1.0], lo=[0], hi=[np.inf])
    assert solve_lp(lp).status == "unbounded"


def test_equality_rows():
    lp = LinearProgram([1.0, 2.0], lo=[0, 0], hi=[5, 5])
    lp.add([1, 1], EQ, 4)
    out = solve_lp(lp)
    assert out.x == pytest.approx([4, 0])


def test_bad_rows_rejected():
    with pytest.raises(ValueError):
        LinearProgram([1.0], rows=[(np.array([1.0, 2.0]), LE, 1.0)])
    with pytest.raises(ValueError):
        LinearProgram([1.0], lo=[2.0], hi=[1.0])


def test_iteration_cap():
    lp = LinearProgram([-1.0, -1.0], lo=[0, 0], hi=[1, 1])
    lp.add([1, 1], LE, 1)
    with pytest.raises(NumericalInstabilityError):
        solve_lp(lp, max_iter=0)


def test_feasible_examples():
    assert feasible([([-2.0], -1.0), ([1.0], 0.75)])
    assert not feasible([([-2.0], -1.0), ([4.0], 0.0)])
    assert feasible([])
    assert feasible([([0.0, 0.0], 0.0)])
    assert not feasible([([0.0], -1.0)])


def test_feasible_point_satisfies_rows():
    rows = [([1.0, 1.0], 1.0), ([-1.0, 0.0], 0.0), ([0.0, -1.0], 0.0)]
    x = feasible_point(rows, start=[5.0, 5.0])
    for a, b in rows:
        assert np.dot(a, x) <= b + 1e-9


def _vertex_oracle(A, b):
    """Nonempty iff some basic point of the system is feasible.

    Every nonempty polyhedron {Ax <= b} contains a point where rank(A)
    linearly independent rows are tight; enumerate those subsets.
    """
    m, d = A.shape
    r = np.linalg.matrix_rank(A) if m else 0
    if r == 0:
        return bool(np.all(b >= -1e-9))
    B = A @ np.linalg.svd(A)[2][:r].T  # coordinates in the row space
    for rows in itertools.combinations(range(m), r):
        M = B[list(rows)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        y = np.linalg.solve(M, b[list(rows)])
        if np.all(B @ y <= b + 1e-9):
            return True
    return False


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 6).flatmap(lambda m: st.tuples(
    st.lists(st.lists(st.integers(-2, 2), min_size=3, max_size=3), min_size=m, max_size=m),
    st.lists(st.integers(-4, 4), min_size=m, max_size=m))))
def test_feasible_matches_vertex_enumeration(data):
    A = np.array(data[0], dtype=float)
    b = np.array(data[1], dtype=float)
    assert feasible(list(zip(A, b))) == _vertex_oracle(A, b)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10_000))
def test_simplex_agrees_with_highs(seed):
    rng = np.random.default_rng(seed)
    n, m = rng.integers(1, 6), rng.integers(1, 6)
    lp = LinearProgram(rng.integers(-5, 6, n).astype(float), lo=np.zeros(n), hi=rng.integers(1, 8, n).astype(float))
    for _ in range(m):
        lp.add(rng.integers(-3, 4, n), [LE, GE, EQ][rng.integers(0, 3)], float(rng.integers(-5, 6)))
    a, b = solve_lp(lp), solve_lp(lp, backend="highs")
    assert a.status == b.status
    if a.optimal:
        assert a.value == pytest.approx(b.value, abs=1e-7)
        assert float(lp.objective @ a.x) == pytest.approx(a.value, rel=1e-9, abs=1e-9)
        A, senses, rhs = lp.matrices()
        r = A @ a.x - rhs
        for ri, s in zip(r, senses):
            assert (ri <= 1e-9) if s == LE else (ri >= -1e-9) if s == GE else abs(ri) <= 1e-9


def test_deterministic():
    rng = np.random.default_rng(3)
    lp = LinearProgram(rng.normal(size=6), lo=np.zeros(6), hi=np.full(6, 4.0))
    for _ in range(5):
        lp.add(rng.normal(size=6), LE, 1.0)
    a, b = solve_lp(lp), solve_lp(lp)
    assert np.array_equal(a.x, b.x)
