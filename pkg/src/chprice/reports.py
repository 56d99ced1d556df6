"""Result files: iteration trace, prices, summary, and an optional SVG plot."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .case import SYSTEM

ITER_COLUMNS = ("k", "s_k", "g_norm", "L_tilde", "q_exact", "q_best", "qbar_best",
                "feasible_cost", "quality", "duality_gap", "window_event")


def fmt(v) -> str:
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v):
        return ""
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.6f}"


def parse(text: str):
    return None if text == "" else float(text)


def _event_text(ev) -> str:
    if ev is None:
        return ""
    return f"anchor={ev.anchor};n={ev.length};qbar={ev.qbar:.6f};{'accepted' if ev.accepted else 'rejected'}"


def iteration_rows(bundle) -> list[dict]:
    rows = []
    for it in bundle.history:
        e = it.extra
        rows.append({
            "k": str(it.k),
            "s_k": fmt(it.stepsize),
            "g_norm": fmt(it.g_norm),
            "L_tilde": fmt(it.L_tilde),
            "q_exact": fmt(e.get("q_exact")),
            "q_best": fmt(e.get("q_best")),
            "qbar_best": fmt(e.get("qbar_best")),
            "feasible_cost": fmt(e.get("feasible_cost")),
            "quality": fmt(e.get("quality")),
            "duality_gap": fmt(e.get("duality_gap")),
            "window_event": _event_text(e.get("window_event")),
        })
    return rows


def _write_csv(path: Path, columns, rows):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def read_iterations(path) -> list[dict]:
    """Parse iterations.csv back into numbers (blank cells become None)."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rec = {k: (v or None) if k == "window_event" else parse(v) for k, v in row.items()}
            rec["k"] = int(row["k"])
            out.append(rec)
    return out


def price_rows(case, prices) -> list[dict]:
    prices = np.asarray(prices)
    if case.mode == SYSTEM:
        return [{"hour": str(t + 1), "lambda": fmt(v)} for t, v in enumerate(prices)]
    return [{"hour": str(t + 1), "bus": str(n), "lambda": fmt(prices[n, t])}
            for t in range(prices.shape[1]) for n in range(prices.shape[0])]


def _finite(v):
    return v if v is not None and math.isfinite(v) else None


def summary(bundle, case) -> dict:
    led = bundle.ledger
    return {
        "case": case.name,
        "mode": case.mode,
        "status": bundle.status,
        "limit_hit": bundle.limit_hit,
        "iterations": len(bundle.history),
        "q_best": _finite(led.q_best),
        "qbar_best": _finite(led.qbar_best),
        "feasible_cost": _finite(led.feasible_cost_best),
        "quality": _finite(led.quality),
        "duality_gap": _finite(led.duality_gap),
        "window_events": len(led.window_events),
        "rejected_bounds": len(led.rejected),
        "timings": dict(bundle.timings),
        "config": {k: getattr(bundle.config, k) for k in (
            "M", "rho", "alpha", "exact_dual_every", "quality_tol",
            "max_iters", "max_seconds", "worker_count")},
    }


def convergence_svg(bundle, width=720, height=420) -> str:
    """Bound envelopes (q_best, qbar_best, feasible cost) and exact dual values."""
    ks, qb, qu, cf, qx = [], [], [], [], []
    for it in bundle.history:
        e = it.extra
        ks.append(it.k)
        qb.append(e.get("q_best", math.inf))
        qu.append(e.get("qbar_best", math.inf))
        cf.append(e.get("feasible_cost", math.inf))
        qx.append(e.get("q_exact"))
    vals = [v for v in qb + qu + cf if v is not None and math.isfinite(v)]
    pad = 50
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>']
    if vals and ks:
        lo, hi = min(vals), max(vals)
        if hi - lo < 1e-9:
            hi = lo + 1.0
        kmax = max(max(ks), 1)
        X = lambda k: pad + (width - 2 * pad) * k / kmax  # noqa: E731
        Y = lambda v: height - pad - (height - 2 * pad) * (v - lo) / (hi - lo)  # noqa: E731

        def line(series, color, label, dy):
            pts = " ".join(f"{X(k):.1f},{Y(v):.1f}" for k, v in zip(ks, series)
                           if v is not None and math.isfinite(v))
            if pts:
                parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
            parts.append(f'<text x="{width - pad - 150}" y="{pad + dy}" fill="{color}" '
                         f'font-size="12">{label}</text>')

        line(cf, "#888888", "feasible cost", 0)
        line(qu, "#c0392b", "upper bound", 16)
        line(qb, "#2c6fbb", "best dual value", 32)
        for k, v in zip(ks, qx):
            if v is not None:
                parts.append(f'<circle cx="{X(k):.1f}" cy="{Y(v):.1f}" r="1.5" fill="#2c6fbb" opacity="0.4"/>')
        parts.append(f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>')
        parts.append(f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>')
        parts.append(f'<text x="{width / 2:.0f}" y="{height - 15}" font-size="12">iteration (0..{kmax})</text>')
        parts.append(f'<text x="5" y="{pad - 10}" font-size="12">$ {lo:.6g} .. {hi:.6g}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_reports(bundle, case, out_dir, plot: bool = False) -> list[Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror or exc}") from exc
    written = []
    p = out / "iterations.csv"
    _write_csv(p, ITER_COLUMNS, iteration_rows(bundle))
    written.append(p)
    p = out / "prices.csv"
    cols = ("hour", "lambda") if case.mode == SYSTEM else ("hour", "bus", "lambda")
    _write_csv(p, cols, price_rows(case, bundle.prices))
    written.append(p)
    p = out / "summary.json"
    try:
        p.write_text(json.dumps(summary(bundle, case), indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {p}: {exc.strerror or exc}") from exc
    written.append(p)
    if plot:
        p = out / "convergence.svg"
        p.write_text(convergence_svg(bundle), encoding="utf-8")
        written.append(p)
    return written
