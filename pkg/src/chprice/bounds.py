"""Upper bound on the optimal dual value from multiplier divergence.

Consecutive multipliers lam^j, lam^{j+1} define the half-space of points at
least as close to lam^{j+1} as to lam^j:

    ||lam - lam^{j+1}||^2 <= ||lam - lam^j||^2
    <=>  2 (lam^j - lam^{j+1}) . lam <= ||lam^j||^2 - ||lam^{j+1}||^2

The quadratic terms cancel, so a window of iterates gives a linear system.
When that system is empty no point (in particular no dual optimum) got
closer at every step, so at some step j of the window

    q* <= L~^j + s^j ||g~^j||^2,

and the maximum of the right-hand side over the window bounds q* from above.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .lp import FEAS_TOL, feasible_point

log = logging.getLogger(__name__)

OPEN, INFEASIBLE = "open", "infeasible"
LONG_WINDOW = 50


def divergence_row(lam_j, lam_next) -> tuple[np.ndarray, float]:
    """(a, b) with a.lam <= b  iff  lam is no farther from lam_next than from lam_j."""
    u = np.ravel(np.asarray(lam_j, dtype=float))
    v = np.ravel(np.asarray(lam_next, dtype=float))
    d = u - v
    return 2.0 * d, float(d @ (u + v))


@dataclass
class DivergenceWindow:
    anchor: int
    iterates: list = field(default_factory=list)  # flattened snapshots
    indices: list = field(default_factory=list)  # iteration index of each snapshot
    rows: list = field(default_factory=list)  # (a_j, b_j)
    status: str = OPEN
    witness: np.ndarray | None = None  # a point of the system, anchor-centred
    checked: int = 0  # length at the last phase-1 solve

    @classmethod
    def start(cls, k: int, lam) -> "DivergenceWindow":
        return cls(k, [np.ravel(np.asarray(lam, dtype=float)).copy()], [k])

    @property
    def length(self) -> int:
        return len(self.iterates) - 1

    def shifted_rows(self):
        """Rows rewritten in coordinates centred on the anchor snapshot.

        Same half-spaces; avoids cancellation in ||lam||^2 differences.
        """
        c = self.iterates[0]
        out = []
        for j in range(len(self.iterates) - 1):
            dj = self.iterates[j] - c
            dn = self.iterates[j + 1] - c
            diff = dj - dn
            out.append((2.0 * diff, float(diff @ (dj + dn))))
        return out


def window_extend(window: DivergenceWindow, lam_new, k_new: int | None = None) -> DivergenceWindow:
    """Append a snapshot and its inequality, then test the system for emptiness."""
    if window.status != OPEN:
        raise ValueError("window is closed; reset it first")
    v = np.ravel(np.asarray(lam_new, dtype=float)).copy()
    if v.shape != window.iterates[0].shape:
        raise ValueError("multiplier dimension changed within a window")
    window.rows.append(divergence_row(window.iterates[-1], v))
    window.iterates.append(v)
    window.indices.append(window.indices[-1] + 1 if k_new is None else k_new)
    rows = window.shifted_rows()
    # A point satisfying every row settles feasibility without an LP solve.
    A = np.array([a for a, _ in rows])
    b = np.array([r for _, r in rows])
    slack = 1e-12 * np.maximum(1.0, np.linalg.norm(A, axis=1))
    c = window.iterates[0]
    cands = [window.iterates[-1] - c]
    if window.witness is not None:
        cands.insert(0, window.witness)
    for w in cands:
        if w is not None and np.all(A @ w <= b + slack):
            window.witness = w
            return window
    if window.length > LONG_WINDOW and window.length - window.checked < window.length // 10:
        # long window: solve again only after it grew by a tenth
        return window
    window.checked = window.length
    window.witness = feasible_point(rows, tol=FEAS_TOL, start=window.witness)
    if window.witness is None:
        window.status = INFEASIBLE
    return window


def window_bound(window: DivergenceWindow, history) -> float:
    """Upper bound from a closed window.

    ``history`` maps iteration index to an iterate carrying ``stepsize``,
    ``g_norm`` and ``L_tilde``. Candidates are the iterates whose steps formed
    the window's inequalities, i.e. every snapshot except the newest.
    """
    if window.status != INFEASIBLE:
        raise ValueError("bound requested from a window that has not closed")
    best = -math.inf
    for k in window.indices[:-1]:
        try:
            it = history[k]
        except (KeyError, IndexError):
            raise KeyError(f"no iterate recorded for iteration {k}") from None
        best = max(best, it.stepsize * it.g_norm ** 2 + it.L_tilde)
    return best


def window_reset(window: DivergenceWindow) -> DivergenceWindow:
    """New window anchored at the newest snapshot: k -> k + n, n -> 1."""
    return DivergenceWindow(window.indices[-1], [window.iterates[-1]], [window.indices[-1]])


@dataclass
class WindowEvent:
    anchor: int
    length: int
    qbar: float
    accepted: bool


@dataclass
class BoundsLedger:
    q_best: float = -math.inf
    qbar_best: float = math.inf
    feasible_cost_best: float = math.inf
    window_events: list = field(default_factory=list)
    rejected: list = field(default_factory=list)

    @property
    def quality(self) -> float:
        if not (math.isfinite(self.qbar_best) and math.isfinite(self.q_best)) or self.qbar_best == 0:
            return math.inf
        return (self.qbar_best - self.q_best) / abs(self.qbar_best)

    @property
    def duality_gap(self) -> float:
        if not (math.isfinite(self.feasible_cost_best) and math.isfinite(self.q_best)) \
                or self.feasible_cost_best == 0:
            return math.inf
        return (self.feasible_cost_best - self.q_best) / abs(self.feasible_cost_best)

    def snapshot(self) -> dict:
        return {
            "q_best": self.q_best,
            "qbar_best": self.qbar_best,
            "feasible_cost": self.feasible_cost_best,
            "quality": self.quality,
            "duality_gap": self.duality_gap,
        }


def ledger_update(ledger: BoundsLedger, q_candidate: float | None = None,
                  qbar_candidate: float | None = None,
                  cfeas_candidate: float | None = None) -> BoundsLedger:
    """Fold new bound candidates into the ledger (in place; also returned).

    An upper-bound candidate below the best dual value contradicts the
    divergence assumption for its window; it is logged and discarded.
    """
    if q_candidate is not None:
        ledger.q_best = max(ledger.q_best, q_candidate)
    if cfeas_candidate is not None:
        ledger.feasible_cost_best = min(ledger.feasible_cost_best, cfeas_candidate)
    if qbar_candidate is not None:
        if qbar_candidate < ledger.q_best:
            ledger.rejected.append(qbar_candidate)
            log.warning("upper bound %.6f below best dual value %.6f rejected",
                        qbar_candidate, ledger.q_best)
        else:
            ledger.qbar_best = min(ledger.qbar_best, qbar_candidate)
    return ledger


class BoundTracker:
    """Window protocol driven once per multiplier update; times its own work."""

    def __init__(self, k0: int, lam0):
        self.window = DivergenceWindow.start(k0, lam0)
        self.seconds = 0.0

    def push(self, k_new: int, lam_new, history, ledger: BoundsLedger) -> WindowEvent | None:
        t0 = time.perf_counter()
        try:
            window_extend(self.window, lam_new, k_new)
            if self.window.status != INFEASIBLE:
                return None
            qbar = window_bound(self.window, history)
            accepted = qbar >= ledger.q_best
            ledger_update(ledger, qbar_candidate=qbar)
            ev = WindowEvent(self.window.anchor, self.window.length, qbar, accepted)
            ledger.window_events.append(ev)
            self.window = window_reset(self.window)
            return ev
        finally:
            self.seconds += time.perf_counter() - t0
