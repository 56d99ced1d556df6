"""Static problem data: generating units, the DC network, and demand."""

from __future__ import annotations

import json
import logging
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

SYSTEM, NODAL = "system", "nodal"

UNIT_FIELDS = (
    "id", "bus", "p_min", "p_max", "ramp", "startup_ramp", "initial_ramp",
    "min_up", "min_down", "energy_cost", "startup_cost", "noload_cost",
    "init_on", "init_dwell", "init_power",
)


class CaseError(ValueError):
    """Raised when a case document cannot be parsed or fails validation."""


@dataclass(frozen=True)
class UnitParams:
    id: str
    p_min: float
    p_max: float
    ramp: float
    startup_ramp: float
    initial_ramp: float
    min_up: int
    min_down: int
    energy_cost: float
    startup_cost: float
    noload_cost: float
    init_on: bool
    init_dwell: int
    init_power: float
    bus: int | None = None

    def violations(self) -> list[str]:
        """Names of violated invariants (empty when the unit is valid)."""
        out = []
        if not 0 <= self.p_min <= self.p_max:
            out.append("0 <= p_min <= p_max")
        if not self.ramp > 0:
            out.append("ramp > 0")
        if not self.initial_ramp > 0:
            out.append("initial_ramp > 0")
        if self.startup_ramp < self.p_min:
            out.append("unit can never start: startup_ramp < p_min")
        if self.min_up < 1 or self.min_down < 1:
            out.append("min_up >= 1 and min_down >= 1")
        if min(self.energy_cost, self.startup_cost, self.noload_cost) < 0:
            out.append("costs must be nonnegative")
        if self.init_dwell < 0:
            out.append("init_dwell >= 0")
        if self.init_on and not self.p_min <= self.init_power <= self.p_max:
            out.append("initially on: p_min <= init_power <= p_max")
        if not self.init_on and self.init_power != 0:
            out.append("initially off: init_power == 0")
        return out

    @property
    def forced_on_until(self) -> int:
        """Number of leading hours the unit must stay on (min-up carry-over)."""
        return max(0, self.min_up - self.init_dwell) if self.init_on else 0

    @property
    def forced_off_until(self) -> int:
        """Number of leading hours the unit must stay off (min-down carry-over)."""
        return 0 if self.init_on else max(0, self.min_down - self.init_dwell)


@dataclass(frozen=True)
class Line:
    sending: int
    receiving: int
    reactance: float
    f_min: float
    f_max: float


@dataclass(frozen=True, eq=False)
class NetworkModel:
    bus_count: int
    lines: tuple[Line, ...]
    reference_bus: int
    nodal_demand: np.ndarray  # (bus_count, T), buses 0-based

    def violations(self) -> list[str]:
        out = []
        n = self.bus_count
        if not 0 <= self.reference_bus < n:
            out.append("reference_bus out of range")
        for k, ln in enumerate(self.lines):
            if not (0 <= ln.sending < n and 0 <= ln.receiving < n) or ln.sending == ln.receiving:
                out.append(f"line {k}: bad endpoints")
            if not ln.reactance > 0:
                out.append(f"line {k}: reactance X_l > 0")
            if not ln.f_min <= ln.f_max:
                out.append(f"line {k}: f_min <= f_max")
            if not (math.isfinite(ln.f_min) and math.isfinite(ln.f_max)):
                out.append(f"line {k}: flow limits must be finite")
        if np.any(self.nodal_demand < 0):
            out.append("nodal_demand >= 0")
        if not out and not self.connected():
            out.append("network graph is connected")
        return out

    def connected(self) -> bool:
        adj = [[] for _ in range(self.bus_count)]
        for ln in self.lines:
            adj[ln.sending].append(ln.receiving)
            adj[ln.receiving].append(ln.sending)
        seen = {0}
        todo = deque([0])
        while todo:
            for nb in adj[todo.popleft()]:
                if nb not in seen:
                    seen.add(nb)
                    todo.append(nb)
        return len(seen) == self.bus_count

    def incidence(self) -> np.ndarray:
        """Line-by-bus matrix with +1 at the sending bus and -1 at the receiving bus."""
        A = np.zeros((len(self.lines), self.bus_count))
        for k, ln in enumerate(self.lines):
            A[k, ln.sending] = 1.0
            A[k, ln.receiving] = -1.0
        return A


@dataclass(frozen=True, eq=False)
class CaseData:
    horizon: int
    units: tuple[UnitParams, ...]
    mode: str = SYSTEM
    system_demand: np.ndarray | None = None
    network: NetworkModel | None = None
    name: str = ""
    warnings: tuple[str, ...] = field(default=(), compare=False)

    @property
    def demand(self) -> np.ndarray:
        """Demand shaped like the multipliers: (T,) or (N, T)."""
        if self.mode == SYSTEM:
            return self.system_demand
        return self.network.nodal_demand

    @property
    def total_demand(self) -> np.ndarray:
        return self.system_demand if self.mode == SYSTEM else self.network.nodal_demand.sum(axis=0)

    @property
    def price_shape(self) -> tuple[int, ...]:
        if self.mode == SYSTEM:
            return (self.horizon,)
        return (self.network.bus_count, self.horizon)

    def unit_bus_matrix(self) -> np.ndarray:
        """(N, I) 0/1 matrix mapping units to their buses."""
        M = np.zeros((self.network.bus_count, len(self.units)))
        for i, u in enumerate(self.units):
            M[u.bus, i] = 1.0
        return M

    def as_system(self) -> "CaseData":
        """Same units, demand aggregated over buses, line constraints ignored."""
        if self.mode == SYSTEM:
            return self
        return CaseData(self.horizon, self.units, SYSTEM, self.total_demand.copy(),
                        self.network, self.name, self.warnings)

    def violations(self) -> list[str]:
        out = []
        if self.horizon < 1:
            out.append("horizon T >= 1")
        if not self.units:
            out.append("at least one unit")
        ids = [u.id for u in self.units]
        if len(set(ids)) != len(ids):
            out.append("unit ids are unique")
        for u in self.units:
            out.extend(f"unit {u.id}: {v}" for v in u.violations())
        if self.mode == SYSTEM:
            if self.system_demand is None or self.system_demand.shape != (self.horizon,):
                out.append("system_demand has length T")
            elif np.any(self.system_demand < 0):
                out.append("system_demand >= 0")
        elif self.mode == NODAL:
            net = self.network
            if net is None:
                out.append("nodal mode requires a network")
            else:
                if net.nodal_demand.shape != (net.bus_count, self.horizon):
                    out.append("nodal_demand is N x T")
                out.extend(net.violations())
                for u in self.units:
                    if u.bus is None or not 0 <= u.bus < net.bus_count:
                        out.append(f"unit {u.id}: bus does not resolve")
        else:
            out.append(f"mode is system or nodal, got {self.mode!r}")
        return out


def _capacity_warnings(case: CaseData) -> tuple[str, ...]:
    cap = sum(u.p_max for u in case.units)
    short = np.flatnonzero(case.total_demand > cap + 1e-9)
    if short.size:
        return (f"demand exceeds total capacity {cap:g} MW at hours {(short + 1).tolist()}",)
    return ()


def _unit_from_dict(d: dict, k: int) -> UnitParams:
    missing = [f for f in UNIT_FIELDS if f not in d and f != "bus"]
    if missing:
        raise CaseError(f"units[{k}]: missing fields {missing}")
    extra = set(d) - set(UNIT_FIELDS)
    if extra:
        raise CaseError(f"units[{k}]: unknown fields {sorted(extra)}")
    try:
        return UnitParams(
            id=str(d["id"]),
            bus=None if d.get("bus") is None else int(d["bus"]),
            p_min=float(d["p_min"]), p_max=float(d["p_max"]),
            ramp=float(d["ramp"]), startup_ramp=float(d["startup_ramp"]),
            initial_ramp=float(d["initial_ramp"]),
            min_up=int(d["min_up"]), min_down=int(d["min_down"]),
            energy_cost=float(d["energy_cost"]), startup_cost=float(d["startup_cost"]),
            noload_cost=float(d["noload_cost"]),
            init_on=bool(d["init_on"]), init_dwell=int(d["init_dwell"]),
            init_power=float(d["init_power"]),
        )
    except (TypeError, ValueError) as exc:
        raise CaseError(f"units[{k}] (id {d.get('id')!r}): {exc}") from None


def case_from_dict(doc: dict, name: str = "") -> CaseData:
    if not isinstance(doc, dict):
        raise CaseError("case document must be a JSON object")
    for key in ("horizon", "mode", "units"):
        if key not in doc:
            raise CaseError(f"missing top-level key {key!r}")
    T = doc["horizon"]
    if not isinstance(T, int):
        raise CaseError("horizon: expected an integer")
    units = tuple(_unit_from_dict(d, k) for k, d in enumerate(doc["units"]))
    mode = doc["mode"]
    system_demand = None
    if doc.get("system_demand") is not None:
        system_demand = np.asarray(doc["system_demand"], dtype=float)
    network = None
    if doc.get("network") is not None:
        net = doc["network"]
        try:
            lines = tuple(
                Line(int(ln["sending"]), int(ln["receiving"]), float(ln["reactance"]),
                     float(ln["f_min"]), float(ln["f_max"]))
                for ln in net["lines"]
            )
            network = NetworkModel(int(net["bus_count"]), lines, int(net["reference_bus"]),
                                   np.asarray(net["nodal_demand"], dtype=float))
        except (KeyError, TypeError, ValueError) as exc:
            raise CaseError(f"network: {exc!r}") from None
    if mode == SYSTEM and system_demand is None and network is not None:
        system_demand = network.nodal_demand.sum(axis=0)
    case = CaseData(T, units, mode, system_demand, network, name)
    problems = case.violations()
    if problems:
        raise CaseError("; ".join(problems))
    warnings = _capacity_warnings(case)
    for w in warnings:
        log.warning("%s: %s", name or "case", w)
    return CaseData(T, units, mode, system_demand, network, name, warnings)


def load_case(source: str, name: str = "") -> CaseData:
    """Parse and validate a case document given as JSON text."""
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise CaseError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return case_from_dict(doc, name)


def read_case(path: str | Path) -> CaseData:
    path = Path(path)
    return load_case(path.read_text(encoding="utf-8"), name=path.stem)


def bundled_case(name: str) -> CaseData:
    """One of ``example1``, ``ieee118``, ``ieee118_tx``."""
    fname = name if name.endswith(".json") else f"{name}.json"
    text = resources.files("chprice.data").joinpath(fname).read_text(encoding="utf-8")
    return load_case(text, name=Path(fname).stem)


def case_to_dict(case: CaseData) -> dict:
    doc = {
        "horizon": case.horizon,
        "mode": case.mode,
        "units": [{k: v for k, v in asdict(u).items() if not (k == "bus" and v is None)}
                  for u in case.units],
    }
    if case.system_demand is not None:
        doc["system_demand"] = case.system_demand.tolist()
    if case.network is not None:
        net = case.network
        doc["network"] = {
            "bus_count": net.bus_count,
            "reference_bus": net.reference_bus,
            "lines": [asdict(ln) for ln in net.lines],
            "nodal_demand": net.nodal_demand.tolist(),
        }
    return doc


def dump_case(case: CaseData) -> str:
    return json.dumps(case_to_dict(case), indent=1)


def merit_order(case: CaseData) -> list[UnitParams]:
    """Units by ascending energy cost, ties by id."""
    return sorted(case.units, key=lambda u: (u.energy_cost, u.id))
