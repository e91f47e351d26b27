"""Typed network data model, per-unit conventions and file ingestion.

All electrical quantities are stored in per-unit on the system base. The
network file format speaks MW/MVA and is converted on ingest, so the
solvers downstream never see engineering units.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Bus",
    "Line",
    "Generator",
    "Network",
    "MaintenanceCalendar",
    "Violation",
    "NetworkError",
    "load_network",
    "loads_network_str",
    "serialize",
    "validate",
    "apply_load_step",
    "load_calendar_csv",
]

BUS_KINDS = ("slack", "pv", "pq")


class NetworkError(ValueError):
    """Raised when a network file cannot be parsed or violates an invariant."""


@dataclass(frozen=True)
class Violation:
    element: str
    rule: str
    message: str

    def __str__(self) -> str:
        return f"{self.element}: {self.rule} -- {self.message}"


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str = "pq"
    voltage_setpoint: float = 1.0
    p_load: float = 0.0  # pu
    q_load: float = 0.0  # pu


@dataclass(frozen=True)
class Line:
    id: int
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_shunt: float = 0.0
    rating: float = 1.0  # pu apparent power


@dataclass(frozen=True)
class Generator:
    id: int
    bus: int
    p_min: float
    p_max: float
    cost: float  # currency per pu-MW


@dataclass(frozen=True)
class Network:
    """Immutable grid model shared by every kernel.

    ``load_series`` optionally carries per-step loads, either as scaling
    factors applied to the base bus loads or as absolute per-bus values.
    """

    base_mva: float
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...] = ()
    load_series_kind: str = "none"  # none | scale | absolute
    load_series: tuple[tuple[float, ...], ...] = ()

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def horizon(self) -> int:
        return len(self.load_series)

    def bus_index(self, bus_id: int) -> int:
        try:
            return self._bus_pos[bus_id]
        except KeyError:
            raise NetworkError(f"unknown bus id {bus_id}") from None

    @property
    def _bus_pos(self) -> dict[int, int]:
        # cached lazily on the instance; frozen dataclass so go via __dict__
        pos = self.__dict__.get("_bus_pos_cache")
        if pos is None:
            pos = {b.id: i for i, b in enumerate(self.buses)}
            self.__dict__["_bus_pos_cache"] = pos
        return pos

    def base_loads(self) -> tuple[np.ndarray, np.ndarray]:
        p = np.array([b.p_load for b in self.buses])
        q = np.array([b.q_load for b in self.buses])
        return p, q

    def generator_index(self, gen_id: int) -> int:
        for i, g in enumerate(self.generators):
            if g.id == gen_id:
                return i
        raise NetworkError(f"unknown generator id {gen_id}")


@dataclass(frozen=True)
class MaintenanceCalendar:
    """Generator availability over a day horizon, entries in {0, 1}."""

    availability: np.ndarray  # shape (n_gen, horizon_days)
    horizon_days: int

    def __post_init__(self):
        a = np.asarray(self.availability, dtype=np.int8)
        if a.ndim != 2 or a.shape[1] != self.horizon_days:
            raise NetworkError(
                f"calendar shape {a.shape} does not match horizon {self.horizon_days}"
            )
        if not np.isin(a, (0, 1)).all():
            raise NetworkError("calendar entries must be 0 or 1")
        object.__setattr__(self, "availability", a)

    def with_outage(self, gen_pos: int, days: range) -> "MaintenanceCalendar":
        a = self.availability.copy()
        a[gen_pos, days.start : days.stop] = 0
        return MaintenanceCalendar(a, self.horizon_days)


# ---------------------------------------------------------------------------
# validation

def validate(net: Network) -> list[Violation]:
    """Check all network invariants; returns every violation, never raises."""
    out: list[Violation] = []
    seen: set[int] = set()
    n_slack = 0
    for b in net.buses:
        if b.id in seen:
            out.append(Violation(f"bus {b.id}", "bus id unique", "duplicate id"))
        seen.add(b.id)
        if b.kind not in BUS_KINDS:
            out.append(Violation(f"bus {b.id}", "kind", f"unknown kind {b.kind!r}"))
        elif b.kind == "slack":
            n_slack += 1
        if not (0.5 < b.voltage_setpoint < 1.5):
            out.append(
                Violation(f"bus {b.id}", "setpoint in (0.5, 1.5)",
                          f"setpoint {b.voltage_setpoint}")
            )
    if n_slack != 1:
        out.append(Violation("network", "exactly one slack bus", f"found {n_slack}"))

    ids = {b.id for b in net.buses}
    for ln in net.lines:
        if ln.from_bus not in ids or ln.to_bus not in ids:
            out.append(
                Violation(f"line {ln.id}", "endpoints exist",
                          f"{ln.from_bus}-{ln.to_bus} references a missing bus")
            )
        if ln.from_bus == ln.to_bus:
            out.append(Violation(f"line {ln.id}", "from != to", "self loop"))
        if ln.r < 0:
            out.append(Violation(f"line {ln.id}", "resistance >= 0", f"r={ln.r}"))
        if ln.x == 0:
            out.append(Violation(f"line {ln.id}", "reactance != 0", "x is zero"))
        if ln.rating <= 0:
            out.append(Violation(f"line {ln.id}", "rating > 0", f"rating={ln.rating}"))

    for g in net.generators:
        if g.bus not in ids:
            out.append(Violation(f"generator {g.id}", "bus exists", f"bus {g.bus}"))
        if not (0 <= g.p_min <= g.p_max):
            out.append(
                Violation(f"generator {g.id}", "bounds ordered",
                          f"p_min={g.p_min}, p_max={g.p_max}")
            )
        if g.cost < 0:
            out.append(Violation(f"generator {g.id}", "cost >= 0", f"cost={g.cost}"))

    if net.buses and not _connected(net):
        out.append(Violation("network", "connected", "more than one island"))

    if net.load_series_kind not in ("none", "scale", "absolute"):
        out.append(Violation("load_series", "kind",
                             f"unknown kind {net.load_series_kind!r}"))
    for t, row in enumerate(net.load_series):
        if len(row) != net.n_bus:
            out.append(
                Violation(f"load_series step {t}", "row length = bus count",
                          f"{len(row)} values for {net.n_bus} buses")
            )
    return out


def _connected(net: Network) -> bool:
    ids = [b.id for b in net.buses]
    adj: dict[int, list[int]] = {i: [] for i in ids}
    for ln in net.lines:
        if ln.from_bus in adj and ln.to_bus in adj:
            adj[ln.from_bus].append(ln.to_bus)
            adj[ln.to_bus].append(ln.from_bus)
    seen = {ids[0]}
    stack = [ids[0]]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == len(ids)


# ---------------------------------------------------------------------------
# ingestion / serialization

def load_network(path: str | Path) -> Network:
    """Load and validate a network from its JSON file.

    The file carries MW/MVA; conversion to per-unit happens here.
    """
    p = Path(path)
    if not p.exists():
        raise NetworkError(f"network file not found: {p}")
    return loads_network_str(p.read_text(), source=str(p))


def loads_network_str(text: str, source: str = "<string>") -> Network:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkError(f"{source}: parse error at line {exc.lineno}: {exc.msg}") from exc

    def need(section: str):
        if section not in doc:
            raise NetworkError(f"{source}: missing section {section!r}")
        return doc[section]

    try:
        base = float(need("base_mva"))
        if base <= 0:
            raise NetworkError(f"{source}: base_mva must be positive")
        buses = tuple(
            Bus(
                id=int(b["id"]),
                kind=str(b.get("kind", "pq")),
                voltage_setpoint=float(b.get("voltage_setpoint", 1.0)),
                p_load=float(b.get("p_load_mw", 0.0)) / base,
                q_load=float(b.get("q_load_mvar", 0.0)) / base,
            )
            for b in need("buses")
        )
        lines = tuple(
            Line(
                id=int(ln["id"]),
                from_bus=int(ln["from_bus"]),
                to_bus=int(ln["to_bus"]),
                r=float(ln["r"]),
                x=float(ln["x"]),
                b_shunt=float(ln.get("b_shunt", 0.0)),
                rating=float(ln["rating_mva"]) / base,
            )
            for ln in need("lines")
        )
        generators = tuple(
            Generator(
                id=int(g["id"]),
                bus=int(g["bus"]),
                p_min=float(g.get("p_min_mw", 0.0)) / base,
                p_max=float(g["p_max_mw"]) / base,
                cost=float(g.get("cost", 0.0)),
            )
            for g in doc.get("generators", [])
        )
        series_doc = doc.get("load_series")
        if series_doc is None:
            kind, series = "none", ()
        else:
            kind = str(series_doc["kind"])
            rows = series_doc["steps"]
            if kind == "absolute":
                series = tuple(tuple(float(v) / base for v in row) for row in rows)
            else:
                series = tuple(tuple(float(v) for v in row) for row in rows)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, NetworkError):
            raise
        raise NetworkError(f"{source}: malformed field: {exc}") from exc

    net = Network(
        base_mva=base,
        buses=buses,
        lines=lines,
        generators=generators,
        load_series_kind=kind,
        load_series=series,
    )
    violations = validate(net)
    if violations:
        raise NetworkError(
            f"{source}: invariant violation: " + "; ".join(str(v) for v in violations)
        )
    return net


def serialize(net: Network) -> str:
    """Deterministic JSON serialization (stable key order), in MW/MVA."""
    base = net.base_mva
    doc = {
        "base_mva": base,
        "buses": [
            {
                "id": b.id,
                "kind": b.kind,
                "voltage_setpoint": b.voltage_setpoint,
                "p_load_mw": b.p_load * base,
                "q_load_mvar": b.q_load * base,
            }
            for b in net.buses
        ],
        "lines": [
            {
                "id": ln.id,
                "from_bus": ln.from_bus,
                "to_bus": ln.to_bus,
                "r": ln.r,
                "x": ln.x,
                "b_shunt": ln.b_shunt,
                "rating_mva": ln.rating * base,
            }
            for ln in net.lines
        ],
        "generators": [
            {
                "id": g.id,
                "bus": g.bus,
                "p_min_mw": g.p_min * base,
                "p_max_mw": g.p_max * base,
                "cost": g.cost,
            }
            for g in net.generators
        ],
    }
    if net.load_series_kind != "none":
        if net.load_series_kind == "absolute":
            steps = [[v * base for v in row] for row in net.load_series]
        else:
            steps = [list(row) for row in net.load_series]
        doc["load_series"] = {"kind": net.load_series_kind, "steps": steps}
    return json.dumps(doc, indent=1, sort_keys=False)


def apply_load_step(net: Network, step: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-bus (P, Q) loads in pu at the given series step; pure.

    With no series the base loads apply at step 0 only. Scaling series
    scale P and Q alike; absolute series replace P and keep the base
    power factor for Q.
    """
    p0, q0 = net.base_loads()
    if net.load_series_kind == "none":
        if step != 0:
            raise IndexError(f"step {step} out of range for horizon 1")
        return p0, q0
    if not (0 <= step < net.horizon):
        raise IndexError(f"step {step} out of range for horizon {net.horizon}")
    row = np.array(net.load_series[step])
    if net.load_series_kind == "scale":
        return p0 * row, q0 * row
    # absolute active power; keep each bus's base Q/P ratio
    ratio = np.divide(q0, p0, out=np.zeros_like(q0), where=p0 != 0)
    return row, row * ratio


def load_calendar_csv(path: str | Path, n_generators: int) -> MaintenanceCalendar:
    """Availability matrix CSV: rows = generators, columns = days, entries 0/1."""
    rows = []
    for i, raw in enumerate(Path(path).read_text().strip().splitlines()):
        try:
            rows.append([int(v) for v in raw.split(",")])
        except ValueError as exc:
            raise NetworkError(f"{path}: row {i}: {exc}") from exc
    a = np.array(rows, dtype=np.int8)
    if a.shape[0] != n_generators:
        raise NetworkError(
            f"{path}: {a.shape[0]} rows for {n_generators} generators"
        )
    return MaintenanceCalendar(a, a.shape[1])
