"""In-memory model of a multiconductor (up to 4-wire) network.

Buses carry up to four terminals labeled a, b, c, n. Components connect
ordered lists of (bus, terminal) pairs. The model is immutable after
``build_network`` and safe to share read-only across threads.
"""

from __future__ import annotations

import cmath
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence, Union

import numpy as np

from .errors import (
    DanglingTerminalRef,
    DisconnectedTerminal,
    DuplicateId,
    ModelError,
    NoReferenceBus,
    UnsupportedConfiguration,
)

PHASE_LABELS = ("a", "b", "c", "n")
NEUTRAL = "n"

WINDING_CONFIGS = ("wye_grounded", "wye_floating", "delta")
GROUNDING_VARIANTS = ("none", "sending", "both")
DEVICE_MODELS = (
    "constant_impedance",
    "constant_power",
    "constant_current",
    "exponential",
)


class TerminalRef(NamedTuple):
    """One (bus, terminal) element of the bus-terminal topology."""

    bus: str
    phase: str


class AuxRef(NamedTuple):
    """The auxiliary current unknown introduced by one ideal transformer."""

    component: str


IndexKey = Union[TerminalRef, AuxRef]


def balanced_phasors(terminals: Sequence[str], magnitude: float = 1.0) -> dict[str, complex]:
    """Balanced positive-sequence set: a at 0 deg, b at -120, c at +120, n at 0."""
    angles = {"a": 0.0, "b": -120.0, "c": 120.0}
    out: dict[str, complex] = {}
    for t in terminals:
        if t == NEUTRAL:
            out[t] = 0j
        else:
            out[t] = cmath.rect(magnitude, math.radians(angles[t]))
    return out


@dataclass(frozen=True)
class Bus:
    id: str
    terminals: tuple[str, ...]
    vbase: float = 1.0
    grounded: frozenset[str] = frozenset()
    fixed_phasors: Mapping[str, complex] | None = None

    def __post_init__(self):
        terms = tuple(self.terminals)
        object.__setattr__(self, "terminals", terms)
        object.__setattr__(self, "grounded", frozenset(self.grounded))
        if not 1 <= len(terms) <= 4:
            raise ModelError(f"bus '{self.id}': needs 1..4 terminals, got {len(terms)}")
        if len(set(terms)) != len(terms):
            raise ModelError(f"bus '{self.id}': duplicate terminal labels")
        for t in terms:
            if t not in PHASE_LABELS:
                raise ModelError(f"bus '{self.id}': unknown terminal label '{t}'")
        if not self.grounded <= set(terms):
            raise ModelError(f"bus '{self.id}': grounded terminals not a subset of terminals")
        if self.fixed_phasors is not None:
            if not set(self.fixed_phasors) <= set(terms):
                raise ModelError(f"bus '{self.id}': fixed phasor for unknown terminal")
            object.__setattr__(
                self, "fixed_phasors", {t: complex(v) for t, v in self.fixed_phasors.items()}
            )
        if not self.vbase > 0:
            raise ModelError(f"bus '{self.id}': vbase must be positive")

    @property
    def is_reference(self) -> bool:
        return bool(self.fixed_phasors)


def reference_bus(
    id: str,
    terminals: Sequence[str],
    vbase: float = 1.0,
    phasors: Mapping[str, complex] | None = None,
    grounded: Sequence[str] = (),
) -> Bus:
    """Reference bus; phasors default to the balanced set (neutral at 0)."""
    if phasors is None:
        phasors = balanced_phasors(terminals)
    return Bus(
        id=id,
        terminals=tuple(terminals),
        vbase=vbase,
        grounded=frozenset(grounded),
        fixed_phasors=dict(phasors),
    )


def _as_complex_matrix(m, what: str) -> np.ndarray:
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ModelError(f"{what}: expected a square matrix, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class LinePayload:
    """Series and shunt admittance matrices of an n-wire line (per-unit)."""

    ys: np.ndarray
    ysh_from: np.ndarray | None = None
    ysh_to: np.ndarray | None = None

    def __post_init__(self):
        ys = _as_complex_matrix(self.ys, "line series admittance")
        n = ys.shape[0]
        if n > 4:
            raise ModelError("lines support at most 4 conductors")
        if not np.allclose(ys, ys.T, atol=1e-12):
            raise ModelError("line series admittance must be symmetric")
        # Zero-padding missing wires makes the impedance matrix rank-deficient.
        if n > 1 and (~ys.any(axis=1)).any():
            raise ModelError(
                "line series admittance has an all-zero row; "
                "drop the missing conductor instead of zero-padding"
            )
        shf = np.zeros((n, n), dtype=complex) if self.ysh_from is None else _as_complex_matrix(self.ysh_from, "line shunt (from)")
        sht = np.zeros((n, n), dtype=complex) if self.ysh_to is None else _as_complex_matrix(self.ysh_to, "line shunt (to)")
        if shf.shape != (n, n) or sht.shape != (n, n):
            raise ModelError("line shunt matrices must match the series dimension")
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "ysh_from", shf)
        object.__setattr__(self, "ysh_to", sht)

    @property
    def n_wires(self) -> int:
        return self.ys.shape[0]


@dataclass(frozen=True)
class SwitchPayload:
    n_wires: int
    closed: bool = True

    def __post_init__(self):
        if not 1 <= self.n_wires <= 4:
            raise ModelError("switches support 1..4 conductors")


@dataclass(frozen=True)
class IdealTransformerPayload:
    """Lossless single-phase transformer; grounding selects the model variant."""

    ratio: float
    grounding: str

    def __post_init__(self):
        if not self.ratio > 0:
            raise ModelError("ideal transformer ratio must be positive")
        if self.grounding not in GROUNDING_VARIANTS:
            raise ModelError(f"unknown grounding variant '{self.grounding}'")

    @property
    def n_terminals(self) -> int:
        return {"none": 4, "sending": 3, "both": 2}[self.grounding]


@dataclass(frozen=True)
class TwoWindingTransformerPayload:
    """Lossy two-winding transformer; expanded into ideal units plus impedances."""

    from_config: str
    to_config: str
    ratio: float
    z_series: complex
    y_magnetizing: complex = 0j

    def __post_init__(self):
        for cfg in (self.from_config, self.to_config):
            if cfg not in WINDING_CONFIGS:
                raise UnsupportedConfiguration(f"unknown winding configuration '{cfg}'")
        if not self.ratio > 0:
            raise ModelError("transformer ratio must be positive")
        if self.z_series == 0:
            raise UnsupportedConfiguration(
                "two-winding transformer with zero series impedance; "
                "model it as an ideal transformer instead"
            )
        object.__setattr__(self, "z_series", complex(self.z_series))
        object.__setattr__(self, "y_magnetizing", complex(self.y_magnetizing))

    def winding_terminal_count(self, config: str) -> int:
        return 4 if config == "wye_floating" else 3

    @property
    def n_from(self) -> int:
        return self.winding_terminal_count(self.from_config)

    @property
    def n_to(self) -> int:
        return self.winding_terminal_count(self.to_config)


@dataclass(frozen=True)
class DevicePayload:
    """A load or generator. Generators carry their setpoints negated.

    ``s_ref`` has one entry per connected phase (wye) or per delta branch.
    """

    connection: str
    model: str
    s_ref: np.ndarray
    u_ref: np.ndarray | None = None
    xp: np.ndarray | None = None
    xq: np.ndarray | None = None
    explicit_neutral: bool = False
    is_generator: bool = False

    def __post_init__(self):
        if self.connection not in ("wye", "delta"):
            raise ModelError(f"unknown device connection '{self.connection}'")
        if self.model not in DEVICE_MODELS:
            raise ModelError(f"unknown device model '{self.model}'")
        s = np.atleast_1d(np.asarray(self.s_ref, dtype=complex))
        if self.connection == "delta":
            if s.shape != (3,):
                raise ModelError("delta devices take exactly 3 branch setpoints")
            if self.explicit_neutral:
                raise ModelError("delta devices have no neutral terminal")
        else:
            if not 1 <= len(s) <= 3:
                raise ModelError("wye devices take 1..3 phase setpoints")
        default_u = math.sqrt(3.0) if self.connection == "delta" else 1.0
        u = np.full(len(s), default_u) if self.u_ref is None else np.atleast_1d(np.asarray(self.u_ref, dtype=float))
        if u.shape != s.shape:
            raise ModelError("u_ref must match the setpoint count")
        if not (u > 0).all():
            raise ModelError("reference voltages must be positive")
        object.__setattr__(self, "s_ref", s)
        object.__setattr__(self, "u_ref", u)
        if self.model == "exponential":
            if self.xp is None or self.xq is None:
                raise ModelError("exponential devices need xp and xq exponents")
            xp = np.atleast_1d(np.asarray(self.xp, dtype=float))
            xq = np.atleast_1d(np.asarray(self.xq, dtype=float))
            if xp.shape != s.shape or xq.shape != s.shape:
                raise ModelError("exponents must match the setpoint count")
            object.__setattr__(self, "xp", xp)
            object.__setattr__(self, "xq", xq)

    @property
    def n_phases(self) -> int:
        return len(self.s_ref)

    @property
    def n_terminals(self) -> int:
        if self.connection == "delta":
            return 3
        return self.n_phases + (1 if self.explicit_neutral else 0)


Payload = Union[
    LinePayload,
    SwitchPayload,
    IdealTransformerPayload,
    TwoWindingTransformerPayload,
    DevicePayload,
]

_KIND_BY_PAYLOAD = {
    LinePayload: "line",
    SwitchPayload: "switch",
    IdealTransformerPayload: "ideal_transformer",
    TwoWindingTransformerPayload: "two_winding_transformer",
}


@dataclass(frozen=True)
class Component:
    id: str
    conn: tuple[TerminalRef, ...]
    payload: Payload

    def __post_init__(self):
        object.__setattr__(
            self, "conn", tuple(TerminalRef(b, p) for b, p in self.conn)
        )

    @property
    def kind(self) -> str:
        if isinstance(self.payload, DevicePayload):
            return "generator" if self.payload.is_generator else "load"
        return _KIND_BY_PAYLOAD[type(self.payload)]

    @property
    def is_delivery(self) -> bool:
        return not isinstance(self.payload, DevicePayload)


def _expected_conn_length(comp: Component) -> int:
    p = comp.payload
    if isinstance(p, LinePayload):
        return 2 * p.n_wires
    if isinstance(p, SwitchPayload):
        return 2 * p.n_wires
    if isinstance(p, IdealTransformerPayload):
        return p.n_terminals
    if isinstance(p, TwoWindingTransformerPayload):
        return p.n_from + p.n_to
    if isinstance(p, DevicePayload):
        return p.n_terminals
    raise ModelError(f"component '{comp.id}': unknown payload type")


@dataclass(frozen=True)
class NetworkModel:
    buses: dict[str, Bus]
    components: dict[str, Component]
    reference_bus: str
    bus_terminals: tuple[TerminalRef, ...]  # T^bt
    component_buses: frozenset[tuple[str, str]]  # T^bus
    component_terminals: tuple[tuple[str, str, str], ...]  # T^term


def build_network(buses: Sequence[Bus], components: Sequence[Component]) -> NetworkModel:
    """Assemble and validate the model; derive the topology sets."""
    bus_map: dict[str, Bus] = {}
    for b in buses:
        if b.id in bus_map:
            raise DuplicateId(f"duplicate bus id '{b.id}'")
        bus_map[b.id] = b

    comp_map: dict[str, Component] = {}
    for c in components:
        if c.id in comp_map or c.id in bus_map:
            raise DuplicateId(f"duplicate component id '{c.id}'")
        comp_map[c.id] = c

    refs = [b for b in bus_map.values() if b.is_reference]
    if not refs:
        raise NoReferenceBus("no bus carries fixed phasors")
    if len(refs) > 1:
        raise ModelError("multiple reference buses are not supported")
    ref = refs[0]
    missing = [t for t in ref.terminals if t != NEUTRAL and t not in ref.fixed_phasors]
    if missing:
        raise ModelError(
            f"reference bus '{ref.id}' lacks phasors for terminals {missing}"
        )

    for c in comp_map.values():
        expected = _expected_conn_length(c)
        if len(c.conn) != expected:
            raise ModelError(
                f"component '{c.id}' ({c.kind}): expected {expected} terminal "
                f"connections, got {len(c.conn)}"
            )
        for ref_t in c.conn:
            bus = bus_map.get(ref_t.bus)
            if bus is None or ref_t.phase not in bus.terminals:
                raise DanglingTerminalRef(
                    f"component '{c.id}' references missing terminal "
                    f"({ref_t.bus}, {ref_t.phase})"
                )

    t_bt = tuple(TerminalRef(b.id, t) for b in bus_map.values() for t in b.terminals)
    t_bus = frozenset((c.id, t.bus) for c in comp_map.values() for t in c.conn)
    t_term = tuple((c.id, t.bus, t.phase) for c in comp_map.values() for t in c.conn)

    # Reachability: roots are fixed terminals; each component couples its
    # terminals, and terminals sharing a bus are co-located.
    adjacency: dict[TerminalRef, set[TerminalRef]] = {t: set() for t in t_bt}
    for c in comp_map.values():
        for t1 in c.conn:
            for t2 in c.conn:
                if t1 != t2:
                    adjacency[t1].add(t2)
    for b in bus_map.values():
        terms = [TerminalRef(b.id, t) for t in b.terminals]
        for t1 in terms:
            for t2 in terms:
                if t1 != t2:
                    adjacency[t1].add(t2)
    roots = [
        TerminalRef(b.id, t)
        for b in bus_map.values()
        for t in b.terminals
        if (b.fixed_phasors and t in b.fixed_phasors) or t in b.grounded
    ]
    seen: set[TerminalRef] = set(roots)
    queue = deque(roots)
    while queue:
        cur = queue.popleft()
        for nxt in adjacency[cur]:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    unreachable = [t for t in t_bt if t not in seen]
    if unreachable:
        raise DisconnectedTerminal(
        f"terminals not reachable from the reference bus: {unreachable}"
        )

    return NetworkModel(
        buses=bus_map,
        components=comp_map,
        reference_bus=ref.id,
        bus_terminals=t_bt,
        component_buses=t_bus,
        component_terminals=t_term,
    )


@dataclass(frozen=True)
class IndexMap:
    """Dense indices for the fixed and variable partitions."""

    fixed: dict[IndexKey, int]
    variable: dict[IndexKey, int]

    @property
    def n_fixed(self) -> int:
        return len(self.fixed)

    @property
    def n_variable(self) -> int:
        return len(self.variable)

    def partition_of(self, key: IndexKey) -> tuple[str, int]:
        if key in self.fixed:
            return "fixed", self.fixed[key]
        return "variable", self.variable[key]


def is_fixed_terminal(bus: Bus, terminal: str) -> bool:
    if bus.fixed_phasors and terminal in bus.fixed_phasors:
        return True
    return terminal in bus.grounded


def index_terminals(net: NetworkModel) -> IndexMap:
    """Deterministic partition of terminals (plus transformer auxiliaries).

    Fixed: reference-bus phasor terminals and grounded terminals. Everything
    else, and one auxiliary per ideal transformer, is variable.
    """
    fixed: dict[IndexKey, int] = {}
    variable: dict[IndexKey, int] = {}
    for bus in net.buses.values():
        for t in bus.terminals:
            key = TerminalRef(bus.id, t)
            if is_fixed_terminal(bus, t):
                fixed[key] = len(fixed)
            else:
                variable[key] = len(variable)
    for comp in net.components.values():
        if isinstance(comp.payload, IdealTransformerPayload):
            variable[AuxRef(comp.id)] = len(variable)
    return IndexMap(fixed=fixed, variable=variable)


def fixed_voltage_vector(net: NetworkModel, index: IndexMap) -> np.ndarray:
    """Known voltages: reference phasors, 0 for grounded terminals."""
    uf = np.zeros(index.n_fixed, dtype=complex)
    for key, idx in index.fixed.items():
        bus = net.buses[key.bus]
        if bus.fixed_phasors and key.phase in bus.fixed_phasors:
            uf[idx] = bus.fixed_phasors[key.phase]
    return uf
