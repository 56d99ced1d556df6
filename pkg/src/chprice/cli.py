"""Command-line entry point: ``chprice --case CASE [options]``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from importlib import resources
from pathlib import Path

from .case import NODAL, SYSTEM, CaseError, case_from_dict, case_to_dict, load_case
from .reports import emit_reports
from .slr import CONVERGED, RELAXED_SATISFIED, SlrConfig, run

log = logging.getLogger("chprice")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chprice", description=(
        "Convex-hull prices for unit commitment with a certified upper bound "
        "on the optimal dual value."))
    p.add_argument("--case", required=True, metavar="PATH",
                   help="case JSON file, or the name of a bundled case (example1.json, "
                        "ieee118.json, ieee118_tx.json)")
    p.add_argument("--mode", choices=(SYSTEM, NODAL), help="override the case's solve mode")
    p.add_argument("--quality-tol", type=float, default=0.001)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--max-seconds", type=float, default=900.0)
    p.add_argument("--M", type=float, default=20.0, dest="M")
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--exact-dual-every", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="chprice-out", metavar="DIR")
    p.add_argument("--plot", action="store_true", help="also write convergence.svg")
    p.add_argument("--seed", type=int, default=0, help="reserved; the pipeline is deterministic")
    return p


def resolve_case(arg: str):
    """Read a case from a path, falling back to the bundled cases by file name."""
    path = Path(arg)
    if path.is_file():
        return load_case(path.read_text(encoding="utf-8"), name=path.stem)
    bundled = resources.files("chprice.data").joinpath(path.name)
    if path.parent == Path(".") and path.suffix == ".json" and bundled.is_file():
        return load_case(bundled.read_text(encoding="utf-8"), name=path.stem)
    raise FileNotFoundError(f"case file not found: {arg}")


def with_mode(case, mode):
    if mode is None or mode == case.mode:
        return case
    doc = case_to_dict(case)
    doc["mode"] = mode
    if mode == NODAL and case.network is None:
        raise CaseError("nodal mode needs a network section in the case file")
    return case_from_dict(doc, case.name)


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("CHP_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        case = with_mode(resolve_case(args.case), args.mode)
        cfg = SlrConfig(M=args.M, rho=args.rho, alpha=args.alpha,
                        exact_dual_every=args.exact_dual_every, quality_tol=args.quality_tol,
                        max_iters=args.max_iters, max_seconds=args.max_seconds,
                        worker_count=args.workers)
    except (OSError, CaseError, ValueError) as exc:
        print(f"chprice: error: {exc}", file=sys.stderr)
        return 1
    bundle = run(case, cfg)
    try:
        emit_reports(bundle, case, args.out, plot=args.plot)
    except OSError as exc:
        print(f"chprice: error: {exc}", file=sys.stderr)
        return 1
    q = bundle.quality
    print(f"{case.name}: {bundle.status} after {len(bundle.history)} iterations, "
          f"quality {q:.6g}, duality gap {bundle.duality_gap:.6g}")
    return 0 if bundle.status in (CONVERGED, RELAXED_SATISFIED) else 2


if __name__ == "__main__":
    sys.exit(main())
