"""DC network quantities and the flow part of the relaxed problem."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .case import NetworkModel
from .lp import EQ, LE, LinearProgram, solve_lp
from .schedules import FlowState


class NetworkError(RuntimeError):
    pass


def flow_of_angles(network: NetworkModel, theta) -> np.ndarray:
    """Line flows (theta_s - theta_r) / X for angles per bus (any trailing shape)."""
    theta = np.asarray(theta, dtype=float)
    s = np.array([ln.sending for ln in network.lines])
    r = np.array([ln.receiving for ln in network.lines])
    x = np.array([ln.reactance for ln in network.lines])
    x = x.reshape((-1,) + (1,) * (theta.ndim - 1))
    return (theta[s] - theta[r]) / x


@lru_cache(maxsize=8)
def _structure(network: NetworkModel):
    """Equality block  f - diag(1/X) A theta_free = 0  and variable bounds."""
    L = len(network.lines)
    N = network.bus_count
    free = [n for n in range(N) if n != network.reference_bus]
    A = sp.csr_matrix(network.incidence())[:, free]
    inv_x = sp.diags([1.0 / ln.reactance for ln in network.lines])
    M = sp.hstack([sp.identity(L), -(inv_x @ A)], format="csr")
    lo = np.concatenate([[ln.f_min for ln in network.lines], np.full(N - 1, -np.inf)])
    hi = np.concatenate([[ln.f_max for ln in network.lines], np.full(N - 1, np.inf)])
    s = np.array([ln.sending for ln in network.lines])
    r = np.array([ln.receiving for ln in network.lines])
    return M, lo, hi, np.array(free), s, r


def flow_best_response(network: NetworkModel, prices, backend: str = "highs"):
    """Flows for one hour minimizing sum_l (price_s - price_r) * f_l.

    Returns (theta per bus, f per line, objective value). Power moves toward
    the higher-priced end of each line, up to the line limits.
    """
    prices = np.asarray(prices, dtype=float)
    if prices.shape != (network.bus_count,):
        raise ValueError("one price per bus expected")
    M, lo, hi, free, s, r = _structure(network)
    L = len(network.lines)
    w = prices[s] - prices[r]
    c = np.concatenate([w, np.zeros(free.size)])
    lp = LinearProgram(c, lo=lo, hi=hi,
                       A=M if backend == "highs" else M.toarray(),
                       senses=[EQ] * L, rhs=np.zeros(L))
    out = solve_lp(lp, backend=backend)
    if out.status == "unbounded":
        raise NetworkError("flow subproblem unbounded: check line limits and connectivity")
    if not out.optimal:
        raise NetworkError(f"flow subproblem {out.status}")
    theta = np.zeros(network.bus_count)
    theta[free] = out.x[L:]
    f = flow_of_angles(network, theta)
    return theta, f, float(w @ f)


def flows_best_response(network: NetworkModel, lam: np.ndarray, backend: str = "highs"):
    """Hour-by-hour flow responses to an (N, T) price matrix."""
    T = lam.shape[1]
    theta = np.zeros((network.bus_count, T))
    f = np.zeros((len(network.lines), T))
    total = 0.0
    for t in range(T):
        th, ft, v = flow_best_response(network, lam[:, t], backend)
        theta[:, t] = th
        f[:, t] = ft
        total += v
    return FlowState(theta, f), total


def net_export(network: NetworkModel, f: np.ndarray) -> np.ndarray:
    """Per-bus outflow minus inflow, (N, T)."""
    A = network.incidence()
    return A.T @ f


def balanced_flows(network: NetworkModel, lam: np.ndarray, residual: np.ndarray,
                   backend: str = "highs"):
    """Exact flow minimizers chosen to balance the buses as well as possible.

    ``residual`` is D - (unit output per bus), (N, T). Among the flows that
    minimize the hour's flow term, pick one minimizing sum_n |residual_n +
    export_n - c| over flows and a common level c. Exports sum to zero, so an
    uncongested hour ends with the hour's total imbalance spread evenly over
    the buses and uniform prices stay uniform. Returns (FlowState, total
    flow term).
    """
    M, lo, hi, free, s, r = _structure(network)
    L, N = len(network.lines), network.bus_count
    A = sp.csr_matrix(network.incidence())
    nv = L + free.size
    T = lam.shape[1]
    theta = np.zeros((N, T))
    f = np.zeros((L, T))
    total = 0.0
    eye = sp.identity(N, format="csr")
    top = sp.hstack([M, sp.csr_matrix((L, 2 * N + 1))], format="csr")
    mid = sp.hstack([A.T, sp.csr_matrix((N, free.size)), -eye, eye,
                     sp.csr_matrix(-np.ones((N, 1)))], format="csr")
    for t in range(T):
        th0, f0, v = flow_best_response(network, lam[:, t], backend)
        w = lam[s, t] - lam[r, t]
        cap = sp.csr_matrix(np.concatenate([w, np.zeros(free.size + 2 * N + 1)])[None, :])
        c = np.concatenate([np.zeros(nv), np.ones(2 * N), [0.0]])
        lp = LinearProgram(
            c, lo=np.concatenate([lo, np.zeros(2 * N), [-np.inf]]),
            hi=np.concatenate([hi, np.full(2 * N + 1, np.inf)]),
            A=sp.vstack([top, mid, cap], format="csr"), senses=[EQ] * (L + N) + [LE],
            rhs=np.concatenate([np.zeros(L), -residual[:, t], [v + 1e-7 * max(1.0, abs(v))]]))
        out = solve_lp(lp, backend="highs")
        if out.optimal:
            theta[free, t] = out.x[L:nv]
            f[:, t] = flow_of_angles(network, theta[:, t])
        if not out.optimal or w @ f[:, t] > v + 1e-6 * max(1.0, abs(v)):
            # selection lost to round-off: keep the plain minimizer
            theta[:, t], f[:, t] = th0, f0
        total += float(w @ f[:, t])
    return FlowState(theta, f), total
