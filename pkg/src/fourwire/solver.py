"""Fixed-point current-injection loop: factorize the variable block once,
then iterate compensation currents until the voltage update stalls."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import compensation
from .admittance import (
    DEFAULT_EPS_TF,
    DEFAULT_SHUNT_FLOOR,
    DEFAULT_Y_SWITCH,
    SystemMatrices,
    assemble_system,
    expand_network,
)
from .errors import NonFinite, SingularMatrix
from .linalg import Factorization, LinearEngine, make_engine
from .network import (
    DevicePayload,
    IdealTransformerPayload,
    IndexKey,
    IndexMap,
    NetworkModel,
    TerminalRef,
    fixed_voltage_vector,
    index_terminals,
)

DIVERGENCE_CAP = 100.0  # pu; a voltage estimate beyond this is treated as blow-up


@dataclass
class SolverConfig:
    tol: float = 1e-8
    max_iter: int = 1000
    eps_tf: float = DEFAULT_EPS_TF
    shunt_floor: float = DEFAULT_SHUNT_FLOOR
    y_switch: float = DEFAULT_Y_SWITCH
    engine: str = "sparse"
    damping: float = 1.0
    engine_instance: LinearEngine | None = None  # injected for audit in tests

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class StateVector:
    uf: np.ndarray
    uv: np.ndarray
    iv: np.ndarray


@dataclass
class DeviceBinding:
    """A device plus its stamped linearization and global index keys."""

    id: str
    payload: DevicePayload
    keys: tuple[IndexKey, ...]
    yd: np.ndarray


@dataclass
class Solution:
    converged: bool
    iterations: int
    tol: float
    terminal_voltages: dict[TerminalRef, complex]
    branch_currents: dict[str, tuple[np.ndarray, np.ndarray]]
    branch_powers: dict[str, tuple[np.ndarray, np.ndarray]]
    kcl_residual_max: float
    device_power_residual_max: float
    factorize_count: int
    wall_time_s: float
    divergence: str | None = None


def gather(keys: Sequence[IndexKey], uf: np.ndarray, uv: np.ndarray, index: IndexMap) -> np.ndarray:
    out = np.empty(len(keys), dtype=complex)
    for i, key in enumerate(keys):
        part, idx = index.partition_of(key)
        out[i] = uf[idx] if part == "fixed" else uv[idx]
    return out


def device_bindings(net: NetworkModel, sys: SystemMatrices) -> list[DeviceBinding]:
    out = []
    for comp in net.components.values():
        if isinstance(comp.payload, DevicePayload):
            prim = sys.primitives[comp.id]
            out.append(DeviceBinding(comp.id, comp.payload, prim.keys, prim.matrix))
    return out


def injection_vector(
    devices: Sequence[DeviceBinding], uf: np.ndarray, uv: np.ndarray, index: IndexMap
) -> np.ndarray:
    entries = []
    for dev in devices:
        u = gather(dev.keys, uf, uv, index)
        entries.append((dev.keys, compensation.compensation_current(dev.payload, dev.yd, u)))
    return compensation.scatter(entries, index)


def initialize(
    sys: SystemMatrices, uf: np.ndarray, engine: LinearEngine
) -> tuple[Factorization, np.ndarray]:
    """Single factorization of Yvv and the zero-injection voltage estimate."""
    try:
        f = engine.factorize(sys.yvv)
    except SingularMatrix as exc:
        raise SingularMatrix(
            f"{exc} (system matrix Yvv, {sys.index.n_variable} unknowns)"
        ) from None
    return f, f.solve(-(sys.yvf @ uf))


def iterate(
    sys: SystemMatrices,
    f: Factorization,
    uf: np.ndarray,
    uv_prev: np.ndarray,
    devices: Sequence[DeviceBinding],
) -> np.ndarray:
    """One compensation update re-using the stored factorization."""
    iv = injection_vector(devices, uf, uv_prev, sys.index)
    uv = f.solve(iv - sys.yvf @ uf)
    if not np.isfinite(uv).all():
        raise NonFinite("iteration produced a non-finite voltage")
    if uv.size and np.abs(uv).max() > DIVERGENCE_CAP:
        raise NonFinite(f"voltage magnitude exceeded {DIVERGENCE_CAP} pu; diverging")
    return uv


def converged(uv: np.ndarray, uv_prev: np.ndarray, tol: float) -> bool:
    if uv.shape != uv_prev.shape:
        raise ValueError("iterates must have equal length")
    if uv.size == 0:
        return True
    return float(np.abs(uv - uv_prev).max()) <= tol


def solve_network(
    net: NetworkModel,
    config: SolverConfig | None = None,
    warm_start: dict[TerminalRef, complex] | None = None,
) -> Solution:
    config = config or SolverConfig()
    t0 = time.perf_counter()
    expanded = expand_network(net)
    index = index_terminals(expanded)
    uf = fixed_voltage_vector(expanded, index)
    sys = assemble_system(
        expanded,
        index,
        eps_tf=config.eps_tf,
        shunt_floor=config.shunt_floor,
        y_switch=config.y_switch,
    )
    engine = config.engine_instance or make_engine(config.engine)
    devices = device_bindings(expanded, sys)

    f, uv = initialize(sys, uf, engine)
    if warm_start:
        for key, value in warm_start.items():
            slot = index.variable.get(key)
            if slot is not None:
                uv[slot] = value
    ok = False
    iterations = 0
    for k in range(1, config.max_iter + 1):
        uv_next = iterate(sys, f, uf, uv, devices)
        if config.damping != 1.0:
            uv_next = (1.0 - config.damping) * uv + config.damping * uv_next
        iterations = k
        if converged(uv_next, uv, config.tol):
            uv = uv_next
            ok = True
            break
        uv = uv_next

    return post_process(
        expanded,
        sys,
        uf,
        uv,
        devices,
        converged_flag=ok,
        iterations=iterations,
        config=config,
        factorize_count=engine.factorize_count,
        t0=t0,
    )


def _transformer_end_split(p: IdealTransformerPayload) -> tuple[int, int]:
    return {"none": (2, 2), "sending": (1, 2), "both": (1, 1)}[p.grounding]


def post_process(
    net: NetworkModel,
    sys: SystemMatrices,
    uf: np.ndarray,
    uv: np.ndarray,
    devices: Sequence[DeviceBinding],
    converged_flag: bool,
    iterations: int,
    config: SolverConfig,
    factorize_count: int,
    t0: float,
) -> Solution:
    index = sys.index
    voltages: dict[TerminalRef, complex] = {}
    for key in list(index.fixed) + list(index.variable):
        if isinstance(key, TerminalRef):
            part, idx = index.partition_of(key)
            voltages[key] = complex(uf[idx] if part == "fixed" else uv[idx])

    branch_currents: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    branch_powers: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for comp in net.components.values():
        if not comp.is_delivery:
            continue
        prim = sys.primitives.get(comp.id)
        if prim is None:  # open switch
            continue
        u_local = gather(prim.keys, uf, uv, index)
        i_local = prim.matrix @ u_local
        if isinstance(comp.payload, IdealTransformerPayload):
            n_from, n_to = _transformer_end_split(comp.payload)
            i_local, u_local = i_local[:-1], u_local[:-1]
        else:
            n_from = len(prim.keys) // 2
            n_to = n_from
        i_from, i_to = i_local[:n_from], i_local[n_from : n_from + n_to]
        u_from, u_to = u_local[:n_from], u_local[n_from : n_from + n_to]
        branch_currents[comp.id] = (i_from, i_to)
        branch_powers[comp.id] = (u_from * np.conj(i_from), u_to * np.conj(i_to))

    kcl_max = float("nan")
    power_max = float("nan")
    try:
        iv = injection_vector(devices, uf, uv, index)
        residual = sys.yvf @ uf + sys.yvv @ uv - iv
        kcl_max = float(np.abs(residual).max()) if residual.size else 0.0

        power_max = 0.0
        for dev in devices:
            u = gather(dev.keys, uf, uv, index)
            v = compensation.phase_voltages(dev.payload, u)
            i_term = compensation.device_terminal_currents(dev.payload, u)
            res_term = np.array(
                [
                    residual[index.variable[k]] if k in index.variable else 0j
                    for k in dev.keys
                ]
            )
            delivered = i_term - res_term
            if dev.payload.connection == "wye":
                k = dev.payload.n_phases
                realized = v * np.conj(delivered[:k])
                mismatch = np.abs(realized - compensation.demanded_power(dev.payload, u))
                power_max = max(power_max, float(mismatch.max()))
            else:
                realized_total = complex((u * np.conj(delivered)).sum())
                demanded_total = complex(compensation.demanded_power(dev.payload, u).sum())
                power_max = max(power_max, abs(realized_total - demanded_total))
    except Exception:
        if converged_flag:
            raise

    return Solution(
        converged=converged_flag,
        iterations=iterations,
        tol=config.tol,
        terminal_voltages=voltages,
        branch_currents=branch_currents,
        branch_powers=branch_powers,
        kcl_residual_max=kcl_max,
        device_power_residual_max=power_max,
        factorize_count=factorize_count,
        wall_time_s=time.perf_counter() - t0,
    )
