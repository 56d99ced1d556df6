"""Dense bounded-variable primal simplex.

Small and deterministic by construction: a fixed pivot rule (Dantzig pricing,
switching to Bland's rule once a run of degenerate pivots is observed) and
dense tableau updates. Sized for problems of at most a few hundred variables.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-11
DEGENERACY_LIMIT = 50

LE, EQ, GE = "<=", "=", ">="


class LpError(Exception):
    """Base class for LP kernel failures."""


class NumericalInstabilityError(LpError):
    """Pivoting exceeded the iteration cap without terminating."""


@dataclass
class LinearProgram:
    """min c.x  s.t.  rows (a, rel, b),  lo <= x <= hi.

    Constraints may also be given in bulk as a (possibly sparse) matrix ``A``
    with per-row ``senses`` and ``rhs``; they are placed after ``rows``.
    """

    objective: np.ndarray
    rows: list = field(default_factory=list)
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    A: object = None
    senses: list | None = None
    rhs: np.ndarray | None = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        n = self.objective.size
        self.lo = np.zeros(n) if self.lo is None else np.asarray(self.lo, dtype=float).copy()
        self.hi = np.full(n, np.inf) if self.hi is None else np.asarray(self.hi, dtype=float).copy()
        if self.lo.shape != (n,) or self.hi.shape != (n,):
            raise ValueError("bound vectors must match the objective length")
        if np.any(self.lo > self.hi):
            raise ValueError("variable lower bound exceeds upper bound")
        for a, rel, _ in self.rows:
            if len(a) != n:
                raise ValueError("constraint arity differs from objective length")
            if rel not in (LE, EQ, GE):
                raise ValueError(f"unknown relation {rel!r}")

    def add(self, coeffs, rel: str, rhs: float) -> None:
        self.rows.append((np.asarray(coeffs, dtype=float), rel, float(rhs)))

    @property
    def n(self) -> int:
        return self.objective.size

    def matrices(self, sparse: bool = False):
        """(A, senses, b) covering both row lists and bulk rows."""
        blocks, senses, b = [], [], []
        if self.rows:
            blocks.append(np.vstack([a for a, _, _ in self.rows]))
            senses += [rel for _, rel, _ in self.rows]
            b += [rhs for _, _, rhs in self.rows]
        if self.A is not None:
            blocks.append(self.A)
            senses += list(self.senses)
            b += list(np.asarray(self.rhs, dtype=float))
        if sparse:
            A = sp.vstack([sp.csr_matrix(B) for B in blocks], format="csr") if blocks \
                else sp.csr_matrix((0, self.n))
        else:
            dense = [B.toarray() if sp.issparse(B) else np.asarray(B, dtype=float) for B in blocks]
            A = np.vstack(dense) if dense else np.zeros((0, self.n))
        return A, senses, np.asarray(b, dtype=float)


@dataclass
class LpOutcome:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    value: float = np.nan
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class _Tableau:
    """Working state of the bounded simplex over  A x = b,  lo <= x <= hi."""

    def __init__(self, A, b, lo, hi, cost_phase2, max_iter, slack_of_row=None):
        m, n = A.shape
        self.m, self.n = m, n
        self.max_iter = max_iter
        self.iterations = 0

        # Nonbasic structural starting point: a finite bound, or 0 for free vars.
        x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
        basis = np.full(m, -1)
        if slack_of_row is not None:
            x[slack_of_row] = 0.0
        resid = b - A @ x
        # Crash basis: a row's own slack (unit column) is basic when the value
        # it must take lies within its bounds; other rows get an artificial.
        if slack_of_row is not None:
            sv = resid  # slack column is +e_i and currently at 0
            ok = (sv >= lo[slack_of_row] - FEAS_TOL) & (sv <= hi[slack_of_row] + FEAS_TOL)
            basis[ok] = slack_of_row[ok]
            x[slack_of_row[ok]] = np.clip(sv[ok], lo[slack_of_row[ok]], hi[slack_of_row[ok]])
            resid = np.where(ok, 0.0, resid)
        need = np.flatnonzero(basis < 0)
        k = need.size
        sign = np.where(resid[need] >= 0, 1.0, -1.0)
        art = np.zeros((m, k))
        art[need, np.arange(k)] = sign
        self.T = np.hstack([A, art])
        self.x = np.concatenate([x, np.abs(resid[need])])
        self.lo = np.concatenate([lo, np.zeros(k)])
        self.hi = np.concatenate([hi, np.full(k, np.inf)])
        basis[need] = n + np.arange(k)
        self.basis = basis
        self.is_basic = np.zeros(n + k, dtype=bool)
        self.is_basic[basis] = True
        # B is diagonal with entries 1 (slack) or sign (artificial).
        diag = np.ones(m)
        diag[need] = sign
        self.T = self.T / diag[:, None]
        self.c1 = np.concatenate([np.zeros(n), np.ones(k)])
        self.c2 = np.concatenate([cost_phase2, np.zeros(k)])
        self.allowed = np.ones(n + k, dtype=bool)
        self.n_struct = n

    def objective(self, c):
        return float(c @ self.x)

    def run(self, c) -> str:
        """Iterate to optimality for cost vector c. Returns 'optimal' or 'unbounded'."""
        T, lo, hi = self.T, self.lo, self.hi
        degenerate_run = 0
        bland = False
        while True:
            if self.iterations >= self.max_iter:
                raise NumericalInstabilityError(
                    f"simplex exceeded {self.max_iter} pivots without terminating"
                )
            cb = c[self.basis]
            d = c - cb @ T
            d[self.is_basic] = 0.0
            x = self.x
            can_up = (x < hi - FEAS_TOL) & self.allowed
            can_down = (x > lo + FEAS_TOL) & self.allowed
            score = np.where(can_up & (d < -OPT_TOL), -d, 0.0)
            score = np.maximum(score, np.where(can_down & (d > OPT_TOL), d, 0.0))
            score[self.is_basic] = 0.0
            candidates = np.flatnonzero(score > 0)
            if candidates.size == 0:
                return "optimal"
            j = int(candidates[0]) if bland else int(candidates[np.argmax(score[candidates])])
            delta = 1.0 if (d[j] < 0 and can_up[j]) else -1.0

            col = T[:, j]
            xb = x[self.basis]
            lob, hib = lo[self.basis], hi[self.basis]
            step = np.full(self.m, np.inf)
            rate = delta * col  # basic var i moves by -rate_i * theta
            dec = rate > PIVOT_TOL
            inc = rate < -PIVOT_TOL
            with np.errstate(divide="ignore", invalid="ignore"):
                step[dec] = (xb[dec] - lob[dec]) / rate[dec]
                step[inc] = (hib[inc] - xb[inc]) / (-rate[inc])
            step = np.maximum(step, 0.0)
            flip = hi[j] - lo[j]
            r = -1
            theta = flip
            if step.size:
                r_cand = int(np.argmin(step))
                if step[r_cand] < theta:
                    theta = step[r_cand]
                    if bland:
                        ties = np.flatnonzero(step <= theta + PIVOT_TOL)
                        r_cand = int(ties[np.argmin(self.basis[ties])])
                    r = r_cand
            if not np.isfinite(theta):
                return "unbounded"

            self.iterations += 1
            if theta <= FEAS_TOL:
                degenerate_run += 1
                if degenerate_run >= DEGENERACY_LIMIT:
                    bland = True
            else:
                degenerate_run = 0

            x[self.basis] = xb - rate * theta
            x[j] += delta * theta
            if r < 0:
                continue
            leaving = self.basis[r]
            # Snap the leaving variable exactly onto the bound it reached.
            x[leaving] = lob[r] if rate[r] > 0 else hib[r]
            piv = T[r, j]
            T[r] /= piv
            others = np.arange(self.m) != r
            T[others] -= np.outer(T[others, j], T[r])
            self.is_basic[leaving] = False
            self.is_basic[j] = True
            self.basis[r] = j


def _standardize(lp: LinearProgram):
    """Rows become equalities with one bounded slack each."""
    Ar, senses, b = lp.matrices()
    m, n = Ar.shape
    A = np.hstack([Ar, np.eye(m)])
    slo = np.zeros(m)
    shi = np.zeros(m)
    for i, rel in enumerate(senses):
        if rel == LE:
            shi[i] = np.inf
        elif rel == GE:
            slo[i] = -np.inf
    lo = np.concatenate([lp.lo, slo])
    hi = np.concatenate([lp.hi, shi])
    return A, b, lo, hi, n + np.arange(m)


def solve_lp(lp: LinearProgram, max_iter: int | None = None, backend: str = "simplex") -> LpOutcome:
    """Solve ``lp`` to an optimal basic solution, or report infeasible/unbounded.

    ``backend="highs"`` hands the same program to the sparse HiGHS solver for
    problems too large for the dense tableau.
    """
    if backend == "highs":
        return _solve_highs(lp)
    if backend != "simplex":
        raise ValueError(f"unknown backend {backend!r}")
    A, b, lo, hi, slack = _standardize(lp)
    m, ntot = A.shape
    if max_iter is None:
        max_iter = 50 * (m + ntot) + 50
    c2 = np.concatenate([lp.objective, np.zeros(m)])
    tab = _Tableau(A, b, lo, hi, c2, max_iter, slack)

    tab.run(tab.c1)
    infeas = tab.objective(tab.c1)
    if infeas > FEAS_TOL * max(1.0, float(np.abs(b).max(initial=0.0))):
        return LpOutcome("infeasible", iterations=tab.iterations)
    # Artificials are pinned at zero for phase 2.
    tab.hi[ntot:] = 0.0
    tab.x[ntot:] = np.minimum(tab.x[ntot:], 0.0)
    tab.allowed[ntot:] = False
    status = tab.run(tab.c2)
    if status == "unbounded":
        return LpOutcome("unbounded", iterations=tab.iterations)
    x = tab.x[: lp.n].copy()
    return LpOutcome("optimal", x, float(lp.objective @ x), tab.iterations)


def _solve_highs(lp: LinearProgram) -> LpOutcome:
    A, senses, b = lp.matrices(sparse=True)
    senses = np.asarray(senses)
    le, ge, eq = senses == LE, senses == GE, senses == EQ
    ub_rows = sp.vstack([A[le], -A[ge]], format="csr")
    ub_rhs = np.concatenate([b[le], -b[ge]])
    bounds = np.column_stack([lp.lo, lp.hi])
    res = linprog(
        lp.objective,
        A_ub=ub_rows if ub_rows.shape[0] else None,
        b_ub=ub_rhs if ub_rows.shape[0] else None,
        A_eq=A[eq] if eq.any() else None,
        b_eq=b[eq] if eq.any() else None,
        bounds=bounds,
        method="highs",
        options={"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9},
    )
    if res.status == 0:
        return LpOutcome("optimal", res.x, float(lp.objective @ res.x), int(res.nit))
    if res.status == 3:
        return LpOutcome("unbounded", iterations=int(res.nit))
    if res.status == 2:
        # HiGHS may report "infeasible" for dual-infeasible problems; decide
        # primal feasibility separately.
        chk = linprog(np.zeros(lp.n), A_ub=ub_rows if ub_rows.shape[0] else None,
                      b_ub=ub_rhs if ub_rows.shape[0] else None,
                      A_eq=A[eq] if eq.any() else None, b_eq=b[eq] if eq.any() else None,
                      bounds=bounds, method="highs")
        return LpOutcome("unbounded" if chk.status == 0 else "infeasible", iterations=int(res.nit))
    raise NumericalInstabilityError(f"HiGHS failed: {res.message}")


def feasible(rows: Sequence[tuple], tol: float = FEAS_TOL) -> bool:
    """Decide whether {x : a.x <= b for every (a, b) in rows} is nonempty.

    Rows are (coefficients, rhs) or (coefficients, "<=", rhs). Variables are
    free. Each row is scaled to a unit normal first; when there are fewer rows
    than variables the system is projected onto the row space, which leaves
    the decision unchanged.
    """
    return feasible_point(rows, tol) is not None


def feasible_point(rows: Sequence[tuple], tol: float = FEAS_TOL, start=None):
    """Like feasible(), but returns a point of the set (or None when empty).

    ``start`` moves the origin: rows it satisfies begin with a feasible
    slack in the crash basis, so a good guess needs few pivots.
    """
    if not rows:
        return np.zeros(0)
    A, b = [], []
    for row in rows:
        if len(row) == 3:
            a, rel, rhs = row
            if rel != LE:
                raise ValueError("feasible() takes <= rows only")
        else:
            a, rhs = row
        A.append(np.asarray(a, dtype=float))
        b.append(float(rhs))
    A = np.vstack(A)
    b = np.asarray(b)
    dim = A.shape[1]
    start = np.zeros(dim) if start is None else np.asarray(start, dtype=float)
    b = b - A @ start
    norms = np.linalg.norm(A, axis=1)
    zero = norms <= 1e-14 * max(1.0, float(norms.max()))
    if np.any(b[zero] < -tol):
        return None
    A, b, norms = A[~zero], b[~zero], norms[~zero]
    if A.shape[0] == 0:
        return start.copy()
    A = A / norms[:, None]
    b = b / norms
    m, d = A.shape
    Q = None
    if d > m:
        # x = Q y with Q an orthonormal basis of the row space.
        Q, _ = np.linalg.qr(A.T)
        A = A @ Q
        d = A.shape[1]
    lp = LinearProgram(np.zeros(d), lo=np.full(d, -np.inf), hi=np.full(d, np.inf))
    for i in range(m):
        lp.add(A[i], LE, b[i])
    Ast, bst, lo, hi, slack = _standardize(lp)
    tab = _Tableau(Ast, bst, lo, hi, np.zeros(Ast.shape[1]), 50 * sum(Ast.shape) + 50, slack)
    tab.run(tab.c1)
    if tab.objective(tab.c1) > tol:
        return None
    y = tab.x[:d].copy()
    return start + (Q @ y if Q is not None else y)
