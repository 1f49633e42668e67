"""Primitive admittance matrices and assembly of the partitioned system matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse

from . import linalg
from .errors import DimensionMismatch, ModelError, UnsupportedConfiguration, ZeroReferenceVoltage
from .network import (
    NEUTRAL,
    AuxRef,
    Bus,
    Component,
    DevicePayload,
    IdealTransformerPayload,
    IndexKey,
    IndexMap,
    LinePayload,
    NetworkModel,
    SwitchPayload,
    TerminalRef,
    TwoWindingTransformerPayload,
    build_network,
)

# Phase-to-phase incidence: U_delta = M @ U_phase, I_phase = M.T @ I_delta.
DELTA_M = np.array([[1.0, -1.0, 0.0], [0.0, 1.0, -1.0], [-1.0, 0.0, 1.0]])

DEFAULT_EPS_TF = 1e-10
DEFAULT_SHUNT_FLOOR = 1e-8
DEFAULT_Y_SWITCH = 1e4


@dataclass(frozen=True)
class PrimitiveAdmittance:
    """Dense component matrix plus the system index keys of its rows/columns."""

    matrix: np.ndarray
    keys: tuple[IndexKey, ...]

    def __post_init__(self):
        if self.matrix.shape != (len(self.keys), len(self.keys)):
            raise DimensionMismatch(
                f"primitive matrix {self.matrix.shape} does not match "
                f"{len(self.keys)} index keys"
            )


def line_primitive(ys: np.ndarray, ysh_from: np.ndarray, ysh_to: np.ndarray) -> np.ndarray:
    """Block primitive [[Ys+Ysh_f, -Ys], [-Ys, Ys+Ysh_t]] of an n-wire branch."""
    ys = np.asarray(ys, dtype=complex)
    n = ys.shape[0]
    for m in (ysh_from, ysh_to):
        if np.shape(m) != (n, n):
            raise DimensionMismatch("shunt matrices must match the series dimension")
    out = np.zeros((2 * n, 2 * n), dtype=complex)
    out[:n, :n] = ys + ysh_from
    out[:n, n:] = -ys
    out[n:, :n] = -ys
    out[n:, n:] = ys + ysh_to
    return out


def switch_primitive(n_wires: int, y_series: float = DEFAULT_Y_SWITCH) -> np.ndarray:
    """Closed switch: a stiff line with constant scalar series admittance."""
    eye = np.eye(n_wires, dtype=complex)
    zero = np.zeros((n_wires, n_wires), dtype=complex)
    return line_primitive(y_series * eye, zero, zero)


def ideal_transformer_primitive(
    p: IdealTransformerPayload, eps: float = DEFAULT_EPS_TF
) -> np.ndarray:
    """Lossless transformer variants; last row/column couples the auxiliary current.

    The auxiliary row's right-hand-side current is identically zero, so the
    constraint row can be stamped like any other admittance entry.
    """
    r = p.ratio
    if p.grounding == "none":
        coupling = np.array([1.0 / r, -1.0 / r, -1.0, 1.0])
    elif p.grounding == "sending":
        coupling = np.array([1.0 / r, -1.0, 1.0])
    else:  # both ends grounded
        coupling = np.array([1.0 / r, -1.0])
    k = len(coupling) + 1
    out = np.zeros((k, k), dtype=complex)
    out[-1, :-1] = coupling
    out[:-1, -1] = coupling
    out += eps * np.eye(k)
    return out


def device_reference_admittance(p: DevicePayload) -> np.ndarray:
    """Per-phase (or per-delta-branch) linearization Y_ref = conj(S_ref) / U_ref^2."""
    if not (p.u_ref > 0).all():
        raise ZeroReferenceVoltage("device reference voltage must be positive")
    return np.conj(p.s_ref) / p.u_ref**2


def wye_device_admittance(p: DevicePayload) -> np.ndarray:
    """diag(Y_ref); with explicit neutral, bordered so that row sums are zero."""
    if p.connection != "wye":
        raise ModelError("wye_device_admittance requires a wye device")
    y_ref = device_reference_admittance(p)
    if not p.explicit_neutral:
        return np.diag(y_ref)
    k = len(y_ref)
    out = np.zeros((k + 1, k + 1), dtype=complex)
    out[:k, :k] = np.diag(y_ref)
    out[:k, k] = -y_ref
    out[k, :k] = -y_ref
    out[k, k] = y_ref.sum()
    return out


def delta_device_admittance(p: DevicePayload) -> np.ndarray:
    """M^T diag(Y_ref) M over the three phase-to-phase branches."""
    if p.connection != "delta":
        raise ModelError("delta_device_admittance requires a delta device")
    y_ref = device_reference_admittance(p)
    return DELTA_M.T @ np.diag(y_ref) @ DELTA_M


def device_admittance(p: DevicePayload) -> np.ndarray:
    if p.connection == "delta":
        return delta_device_admittance(p)
    return wye_device_admittance(p)


def decompose_two_winding(
    comp: Component, net: NetworkModel
) -> tuple[list[Bus], list[Component]]:
    """Expand a lossy two-winding transformer into per-phase ideal units.

    Per phase: the series impedance runs from the from-side phase terminal to
    an auto-generated internal bus, and an ideal transformer couples the
    internal node (against the from-winding return terminal) to the to-side
    winding pair. The magnetizing branch, when given, sits at the internal bus.
    """
    p = comp.payload
    if not isinstance(p, TwoWindingTransformerPayload):
        raise ModelError(f"component '{comp.id}' is not a two-winding transformer")

    from_terms = comp.conn[: p.n_from]
    to_terms = comp.conn[p.n_from :]
    earth = None  # sentinel: terminal tied to the earth reference

    def winding_pairs(config, terms):
        phases = terms[:3]
        if config == "wye_grounded":
            return [(t, earth) for t in phases]
        if config == "wye_floating":
            return [(t, terms[3]) for t in phases]
        return [(phases[k], phases[(k + 1) % 3]) for k in range(3)]

    from_pairs = winding_pairs(p.from_config, from_terms)
    to_pairs = winding_pairs(p.to_config, to_terms)
    from_bus = net.buses[from_terms[0].bus]

    buses: list[Bus] = []
    comps: list[Component] = []
    y_series = 1.0 / p.z_series
    for phase, ((f1, f2), (t1, t2)) in zip("abc", zip(from_pairs, to_pairs)):
        internal = Bus(
            id=f"{comp.id}.internal.{phase}", terminals=("a",), vbase=from_bus.vbase
        )
        buses.append(internal)
        int_term = TerminalRef(internal.id, "a")
        ysh_to = np.array([[p.y_magnetizing]]) if p.y_magnetizing else None
        comps.append(
            Component(
                id=f"{comp.id}.z.{phase}",
                conn=(f1, int_term),
                payload=LinePayload(ys=np.array([[y_series]]), ysh_to=ysh_to),
            )
        )
        if f2 is earth and t2 is earth:
            tf = Component(
                id=f"{comp.id}.tf.{phase}",
                conn=(int_term, t1),
                payload=IdealTransformerPayload(ratio=p.ratio, grounding="both"),
            )
        elif f2 is earth:
            tf = Component(
                id=f"{comp.id}.tf.{phase}",
                conn=(int_term, t1, t2),
                payload=IdealTransformerPayload(ratio=p.ratio, grounding="sending"),
            )
        elif t2 is earth:
            # No "receiving end grounded" variant exists; swap sides, invert ratio.
            tf = Component(
                id=f"{comp.id}.tf.{phase}",
                conn=(t1, int_term, f2),
                payload=IdealTransformerPayload(
                    ratio=1.0 / p.ratio, grounding="sending"
                ),
            )
        else:
            tf = Component(
                id=f"{comp.id}.tf.{phase}",
                conn=(int_term, f2, t1, t2),
                payload=IdealTransformerPayload(ratio=p.ratio, grounding="none"),
            )
        comps.append(tf)
    return buses, comps


def expand_network(net: NetworkModel) -> NetworkModel:
    """Replace two-winding transformers with their elementary decomposition."""
    if not any(
        isinstance(c.payload, TwoWindingTransformerPayload)
        for c in net.components.values()
    ):
        return net
    buses = list(net.buses.values())
    comps: list[Component] = []
    for comp in net.components.values():
        if isinstance(comp.payload, TwoWindingTransformerPayload):
            new_buses, new_comps = decompose_two_winding(comp, net)
            buses.extend(new_buses)
            comps.extend(new_comps)
        else:
            comps.append(comp)
    return build_network(buses, comps)


def component_primitive(
    comp: Component,
    eps_tf: float = DEFAULT_EPS_TF,
    shunt_floor: float = DEFAULT_SHUNT_FLOOR,
    y_switch: float = DEFAULT_Y_SWITCH,
) -> PrimitiveAdmittance | None:
    """Primitive matrix with its index keys; None for components that stamp nothing.

    Lines and switches without any shunt get a small capacitive shunt floor on
    every terminal so the variable block keeps a reference to earth.
    """
    p = comp.payload
    keys: tuple[IndexKey, ...] = tuple(comp.conn)
    if isinstance(p, LinePayload):
        m = line_primitive(p.ys, p.ysh_from, p.ysh_to)
        if not (p.ysh_from.any() or p.ysh_to.any()):
            m = m + 1j * shunt_floor * np.eye(m.shape[0])
        return PrimitiveAdmittance(m, keys)
    if isinstance(p, SwitchPayload):
        if not p.closed:
            return None
        m = switch_primitive(p.n_wires, y_switch)
        m = m + 1j * shunt_floor * np.eye(m.shape[0])
        return PrimitiveAdmittance(m, keys)
    if isinstance(p, IdealTransformerPayload):
        m = ideal_transformer_primitive(p, eps_tf)
        return PrimitiveAdmittance(m, keys + (AuxRef(comp.id),))
    if isinstance(p, DevicePayload):
        return PrimitiveAdmittance(device_admittance(p), keys)
    raise UnsupportedConfiguration(
        f"component '{comp.id}' ({comp.kind}) must be expanded before assembly"
    )


@dataclass(frozen=True)
class SystemMatrices:
    """The four partition blocks plus the primitives they were stamped from."""

    yff: scipy.sparse.csc_matrix
    yfv: scipy.sparse.csc_matrix
    yvf: scipy.sparse.csc_matrix
    yvv: scipy.sparse.csc_matrix
    index: IndexMap
    primitives: dict[str, PrimitiveAdmittance]


def assemble_system(
    net: NetworkModel,
    index: IndexMap,
    eps_tf: float = DEFAULT_EPS_TF,
    shunt_floor: float = DEFAULT_SHUNT_FLOOR,
    y_switch: float = DEFAULT_Y_SWITCH,
) -> SystemMatrices:
    """Stamp every primitive additively into the four partition blocks."""
    nf, nv = index.n_fixed, index.n_variable
    blocks = {
        ("fixed", "fixed"): linalg.TripletList(nf, nf),
        ("fixed", "variable"): linalg.TripletList(nf, nv),
        ("variable", "fixed"): linalg.TripletList(nv, nf),
        ("variable", "variable"): linalg.TripletList(nv, nv),
    }
    primitives: dict[str, PrimitiveAdmittance] = {}
    for comp in net.components.values():
        prim = component_primitive(comp, eps_tf, shunt_floor, y_switch)
        if prim is None:
            continue
        primitives[comp.id] = prim
        parts = [index.partition_of(k) for k in prim.keys]
        m = prim.matrix
        for i, (pi, gi) in enumerate(parts):
            for j, (pj, gj) in enumerate(parts):
                v = m[i, j]
                if v != 0:
                    blocks[(pi, pj)].add(gi, gj, v)
    return SystemMatrices(
        yff=linalg.from_triplets(blocks[("fixed", "fixed")]),
        yfv=linalg.from_triplets(blocks[("fixed", "variable")]),
        yvf=linalg.from_triplets(blocks[("variable", "fixed")]),
        yvv=linalg.from_triplets(blocks[("variable", "variable")]),
        index=index,
        primitives=primitives,
    )
