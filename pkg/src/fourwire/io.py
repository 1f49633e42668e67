"""Network and solution documents (JSON) plus the voltage comparison metric.

Complex numbers are written as [re, im] pairs; matrices as row-major nested
lists of such pairs.
"""

from __future__ import annotations

import cmath
import json
import math
from pathlib import Path
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from .errors import ParseError, TerminalSetMismatch
from .network import (
    Bus,
    Component,
    DevicePayload,
    IdealTransformerPayload,
    LinePayload,
    NetworkModel,
    SwitchPayload,
    TerminalRef,
    TwoWindingTransformerPayload,
    build_network,
    reference_bus,
)
from .solver import Solution, SolverConfig

ComplexPair = tuple[float, float]


def _cnum(pair, what: str) -> complex:
    try:
        re, im = pair
        return complex(float(re), float(im))
    except (TypeError, ValueError):
        raise ParseError(f"{what}: complex values must be [re, im] pairs") from None


def _cmat(rows, what: str) -> np.ndarray:
    if not isinstance(rows, (list, tuple)) or not rows:
        raise ParseError(f"{what}: expected a matrix as nested lists")
    n = len(rows)
    out = np.zeros((n, n), dtype=complex)
    for i, row in enumerate(rows):
        if not isinstance(row, (list, tuple)) or len(row) != n:
            raise ParseError(f"{what}: matrix must be square ({n}x{n})")
        for j, entry in enumerate(row):
            out[i, j] = _cnum(entry, what)
    return out


class SourceIn(BaseModel):
    bus: str
    phasors: dict[str, ComplexPair] | None = None


class BusIn(BaseModel):
    id: str
    terminals: list[str]
    vbase: float = 1.0
    grounded: list[str] = Field(default_factory=list)


class LinecodeIn(BaseModel):
    series: list
    shunt_from: list | None = None
    shunt_to: list | None = None


class LineIn(BaseModel):
    id: str
    from_bus: str
    to_bus: str
    terminals: list[str]
    series: list | None = None
    shunt_from: list | None = None
    shunt_to: list | None = None
    linecode: str | None = None


class SwitchIn(BaseModel):
    id: str
    from_bus: str
    to_bus: str
    terminals: list[str]
    closed: bool = True


class IdealTransformerIn(BaseModel):
    kind: Literal["ideal"] = "ideal"
    id: str
    from_bus: str
    to_bus: str
    from_terminals: list[str]
    to_terminals: list[str]
    ratio: float
    grounding: Literal["none", "sending", "both"]


class TwoWindingIn(BaseModel):
    kind: Literal["two_winding"] = "two_winding"
    id: str
    from_bus: str
    to_bus: str
    from_terminals: list[str] = Field(default_factory=lambda: ["a", "b", "c"])
    to_terminals: list[str] = Field(default_factory=lambda: ["a", "b", "c"])
    from_config: Literal["wye_grounded", "wye_floating", "delta"]
    to_config: Literal["wye_grounded", "wye_floating", "delta"]
    ratio: float = 1.0
    z_series: ComplexPair
    y_magnetizing: ComplexPair | None = None


TransformerIn = Annotated[
    Union[IdealTransformerIn, TwoWindingIn], Field(discriminator="kind")
]


class DeviceIn(BaseModel):
    id: str
    bus: str
    connection: Literal["wye", "delta"] = "wye"
    model: Literal[
        "constant_impedance", "constant_power", "constant_current", "exponential"
    ]
    phases: list[str] = Field(default_factory=lambda: ["a", "b", "c"])
    s_ref: list[ComplexPair]
    u_ref: list[float] | None = None
    xp: list[float] | None = None
    xq: list[float] | None = None
    explicit_neutral: bool = False


class SettingsIn(BaseModel):
    tol: float = 1e-8
    max_iter: int = 1000
    eps_tf: float = 1e-10
    shunt_floor: float = 1e-8
    y_switch: float = 1e4
    engine: Literal["dense", "sparse"] = "sparse"


class NetworkDocument(BaseModel):
    source: SourceIn
    buses: list[BusIn]
    linecodes: dict[str, LinecodeIn] = Field(default_factory=dict)
    lines: list[LineIn] = Field(default_factory=list)
    switches: list[SwitchIn] = Field(default_factory=list)
    transformers: list[TransformerIn] = Field(default_factory=list)
    loads: list[DeviceIn] = Field(default_factory=list)
    generators: list[DeviceIn] = Field(default_factory=list)
    settings: SettingsIn = Field(default_factory=SettingsIn)


def _line_matrices(spec: LineIn, doc: NetworkDocument):
    what = f"line '{spec.id}'"
    if spec.linecode is not None:
        code = doc.linecodes.get(spec.linecode)
        if code is None:
            raise ParseError(f"{what}: unknown linecode '{spec.linecode}'")
        series, shf, sht = code.series, code.shunt_from, code.shunt_to
    else:
        if spec.series is None:
            raise ParseError(f"{what}: needs either a series matrix or a linecode")
        series, shf, sht = spec.series, spec.shunt_from, spec.shunt_to
    ys = _cmat(series, what)
    ysh_from = _cmat(shf, what) if shf is not None else None
    ysh_to = _cmat(sht, what) if sht is not None else None
    return ys, ysh_from, ysh_to


def _device_payload(spec: DeviceIn, is_generator: bool) -> DevicePayload:
    s_ref = np.array([_cnum(s, f"device '{spec.id}'") for s in spec.s_ref])
    if is_generator:
        s_ref = -s_ref
    return DevicePayload(
        connection=spec.connection,
        model=spec.model,
        s_ref=s_ref,
        u_ref=None if spec.u_ref is None else np.asarray(spec.u_ref, dtype=float),
        xp=None if spec.xp is None else np.asarray(spec.xp, dtype=float),
        xq=None if spec.xq is None else np.asarray(spec.xq, dtype=float),
        explicit_neutral=spec.explicit_neutral,
        is_generator=is_generator,
    )


def _device_conn(spec: DeviceIn) -> tuple[TerminalRef, ...]:
    conn = [TerminalRef(spec.bus, p) for p in spec.phases[: len(spec.s_ref)]]
    if spec.connection == "delta":
        conn = [TerminalRef(spec.bus, p) for p in spec.phases[:3]]
    elif spec.explicit_neutral:
        conn.append(TerminalRef(spec.bus, "n"))
    return tuple(conn)


def to_network(doc: NetworkDocument) -> tuple[NetworkModel, SettingsIn]:
    buses = []
    for b in doc.buses:
        if b.id == doc.source.bus:
            phasors = None
            if doc.source.phasors is not None:
                phasors = {
                    t: _cnum(v, "source phasor") for t, v in doc.source.phasors.items()
                }
            buses.append(
                reference_bus(b.id, b.terminals, b.vbase, phasors, b.grounded)
            )
        else:
            buses.append(
                Bus(
                    id=b.id,
                    terminals=tuple(b.terminals),
                    vbase=b.vbase,
                    grounded=frozenset(b.grounded),
                )
            )
    if doc.source.bus not in {b.id for b in buses}:
        raise ParseError(f"source references unknown bus '{doc.source.bus}'")

    comps: list[Component] = []
    for spec in doc.lines:
        ys, shf, sht = _line_matrices(spec, doc)
        if len(spec.terminals) != ys.shape[0]:
            raise ParseError(
                f"line '{spec.id}': {len(spec.terminals)} terminals but a "
                f"{ys.shape[0]}-conductor matrix"
            )
        conn = tuple(TerminalRef(spec.from_bus, t) for t in spec.terminals) + tuple(
            TerminalRef(spec.to_bus, t) for t in spec.terminals
        )
        comps.append(
            Component(spec.id, conn, LinePayload(ys=ys, ysh_from=shf, ysh_to=sht))
        )
    for spec in doc.switches:
        conn = tuple(TerminalRef(spec.from_bus, t) for t in spec.terminals) + tuple(
            TerminalRef(spec.to_bus, t) for t in spec.terminals
        )
        comps.append(
            Component(
                spec.id,
                conn,
                SwitchPayload(n_wires=len(spec.terminals), closed=spec.closed),
            )
        )
    for spec in doc.transformers:
        if spec.kind == "ideal":
            conn = tuple(TerminalRef(spec.from_bus, t) for t in spec.from_terminals) + tuple(
                TerminalRef(spec.to_bus, t) for t in spec.to_terminals
            )
            comps.append(
                Component(
                    spec.id,
                    conn,
                    IdealTransformerPayload(ratio=spec.ratio, grounding=spec.grounding),
                )
            )
        else:
            conn = tuple(TerminalRef(spec.from_bus, t) for t in spec.from_terminals) + tuple(
                TerminalRef(spec.to_bus, t) for t in spec.to_terminals
            )
            y_mag = (
                _cnum(spec.y_magnetizing, f"transformer '{spec.id}'")
                if spec.y_magnetizing is not None
                else 0j
            )
            comps.append(
                Component(
                    spec.id,
                    conn,
                    TwoWindingTransformerPayload(
                        from_config=spec.from_config,
                        to_config=spec.to_config,
                        ratio=spec.ratio,
                        z_series=_cnum(spec.z_series, f"transformer '{spec.id}'"),
                        y_magnetizing=y_mag,
                    ),
                )
            )
    for spec in doc.loads:
        comps.append(Component(spec.id, _device_conn(spec), _device_payload(spec, False)))
    for spec in doc.generators:
        comps.append(Component(spec.id, _device_conn(spec), _device_payload(spec, True)))

    return build_network(buses, comps), doc.settings


def load_document(path: str | Path) -> NetworkDocument:
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    try:
        return NetworkDocument.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        loc = ".".join(str(x) for x in first["loc"])
        raise ParseError(f"{path}: {loc}: {first['msg']}") from None


def parse_network(path: str | Path) -> tuple[NetworkModel, SettingsIn]:
    """Read, validate and build a network from a JSON document."""
    return to_network(load_document(path))


def settings_to_config(settings: SettingsIn, **overrides) -> SolverConfig:
    values = settings.model_dump()
    values.update({k: v for k, v in overrides.items() if v is not None})
    return SolverConfig(**values)


class TerminalVoltageOut(BaseModel):
    mag: float
    angle_deg: float
    re: float
    im: float


class BranchFlowOut(BaseModel):
    from_current: list[ComplexPair]
    to_current: list[ComplexPair]
    from_power: list[ComplexPair]
    to_power: list[ComplexPair]


class ResidualsOut(BaseModel):
    kcl_max: float
    device_power_max: float


class SolutionDocument(BaseModel):
    converged: bool
    iterations: int
    tolerance: float
    residuals: ResidualsOut
    wall_time_s: float
    buses: dict[str, dict[str, TerminalVoltageOut]]
    branches: dict[str, BranchFlowOut]


def _pairs(values: np.ndarray) -> list[ComplexPair]:
    return [(float(v.real), float(v.imag)) for v in values]


def solution_to_document(sol: Solution) -> SolutionDocument:
    buses: dict[str, dict[str, TerminalVoltageOut]] = {}
    for (bus, phase), v in sol.terminal_voltages.items():
        buses.setdefault(bus, {})[phase] = TerminalVoltageOut(
            mag=abs(v),
            angle_deg=math.degrees(cmath.phase(v)),
            re=v.real,
            im=v.imag,
        )
    branches = {
        cid: BranchFlowOut(
            from_current=_pairs(i_from),
            to_current=_pairs(i_to),
            from_power=_pairs(sol.branch_powers[cid][0]),
            to_power=_pairs(sol.branch_powers[cid][1]),
        )
        for cid, (i_from, i_to) in sol.branch_currents.items()
    }
    return SolutionDocument(
        converged=sol.converged,
        iterations=sol.iterations,
        tolerance=sol.tol,
        residuals=ResidualsOut(
            kcl_max=sol.kcl_residual_max, device_power_max=sol.device_power_residual_max
        ),
        wall_time_s=sol.wall_time_s,
        buses=buses,
        branches=branches,
    )


def write_solution(sol: Solution, path: str | Path) -> None:
    doc = solution_to_document(sol)
    Path(path).write_text(doc.model_dump_json(indent=2), encoding="utf-8")


def read_solution(path: str | Path) -> SolutionDocument:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return SolutionDocument.model_validate_json(text)
    except ValidationError as exc:
        first = exc.errors()[0]
        loc = ".".join(str(x) for x in first["loc"])
        raise ParseError(f"{path}: {loc}: {first['msg']}") from None


class CompareReport(BaseModel):
    max_error: float
    worst_bus: str | None
    worst_terminal: str | None
    per_bus: dict[str, float]
    threshold: float
    passed: bool


def compare_solutions(
    a: SolutionDocument, b: SolutionDocument, threshold: float = 1e-6
) -> CompareReport:
    """Maximum per-terminal complex voltage difference between two solutions."""
    terms_a = {(bus, t) for bus, d in a.buses.items() for t in d}
    terms_b = {(bus, t) for bus, d in b.buses.items() for t in d}
    if terms_a != terms_b:
        raise TerminalSetMismatch(
            f"solutions cover different terminal sets "
            f"(only in a: {sorted(terms_a - terms_b)}, only in b: {sorted(terms_b - terms_a)})"
        )
    max_error = 0.0
    worst = (None, None)
    per_bus: dict[str, float] = {}
    for bus, terminals in a.buses.items():
        bus_max = 0.0
        for t, va in terminals.items():
            vb = b.buses[bus][t]
            err = abs(complex(va.re, va.im) - complex(vb.re, vb.im))
            bus_max = max(bus_max, err)
            if err > max_error:
                max_error = err
                worst = (bus, t)
        per_bus[bus] = bus_max
    return CompareReport(
        max_error=max_error,
        worst_bus=worst[0],
        worst_terminal=worst[1],
        per_bus=per_bus,
        threshold=threshold,
        passed=max_error <= threshold,
    )
