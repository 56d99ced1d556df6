"""Convex-hull pricing for unit commitment with certified price quality."""

from .case import CaseData, CaseError, NetworkModel, UnitParams, bundled_case, load_case, read_case
from .slr import ResultBundle, SlrConfig, run

__all__ = [
    "CaseData", "CaseError", "NetworkModel", "UnitParams", "ResultBundle", "SlrConfig",
    "bundled_case", "load_case", "read_case", "run",
]
__version__ = "0.1.0"
