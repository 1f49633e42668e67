"""Per-iteration compensation currents for nonlinear loads and generators.

All functions are pure in (payload, admittance, voltage) and return the
correction in the convention I_c = Y_c U_c - I_correction, i.e. the value
Yd @ U - I_device that the solver scatters into the variable current vector.
"""

from __future__ import annotations

import numpy as np

from .admittance import DELTA_M
from .errors import VoltageCollapse
from .network import DevicePayload, IndexKey, IndexMap

COLLAPSE_THRESHOLD = 1e-6


def phase_voltages(p: DevicePayload, u: np.ndarray) -> np.ndarray:
    """Voltage seen by each phase (wye) or each phase-to-phase branch (delta)."""
    u = np.asarray(u, dtype=complex)
    if p.connection == "delta":
        return DELTA_M @ u
    if p.explicit_neutral:
        return u[:-1] - u[-1]
    return u.copy()


def _guard(v: np.ndarray, active: np.ndarray) -> None:
    bad = active & (np.abs(v) < COLLAPSE_THRESHOLD)
    if bad.any():
        raise VoltageCollapse(
            f"device voltage magnitude below {COLLAPSE_THRESHOLD} pu"
        )


def demanded_power(p: DevicePayload, u: np.ndarray) -> np.ndarray:
    """Model power drawn at voltage u, per phase (wye) or delta branch."""
    v = phase_voltages(p, u)
    if p.model == "constant_impedance":
        y_ref = np.conj(p.s_ref) / p.u_ref**2
        return v * np.conj(y_ref * v)
    if p.model == "constant_power":
        return p.s_ref.copy()
    ratio = np.abs(v) / p.u_ref
    if p.model == "constant_current":
        return p.s_ref * ratio
    return p.s_ref.real * ratio**p.xp + 1j * (p.s_ref.imag * ratio**p.xq)


def device_branch_currents(p: DevicePayload, u: np.ndarray) -> np.ndarray:
    """Model current per phase (wye) or per delta branch, consumption-positive."""
    v = phase_voltages(p, u)
    active = p.s_ref != 0
    if p.model != "constant_impedance":
        _guard(v, active)
    s = demanded_power(p, u)
    out = np.zeros_like(v)
    out[active] = np.conj(s[active] / v[active])
    return out


def device_terminal_currents(p: DevicePayload, u: np.ndarray) -> np.ndarray:
    """Model current at every connected terminal, balanced through the neutral."""
    i_branch = device_branch_currents(p, u)
    if p.connection == "delta":
        return DELTA_M.T @ i_branch
    if p.explicit_neutral:
        return np.concatenate([i_branch, [-i_branch.sum()]])
    return i_branch


def wye_compensation(p: DevicePayload, yd: np.ndarray, u: np.ndarray) -> np.ndarray:
    if p.model == "constant_impedance":
        return np.zeros(p.n_terminals, dtype=complex)
    return yd @ u - device_terminal_currents(p, u)


def delta_compensation(p: DevicePayload, yd: np.ndarray, u: np.ndarray) -> np.ndarray:
    if p.model == "constant_impedance":
        return np.zeros(3, dtype=complex)
    return yd @ u - DELTA_M.T @ device_branch_currents(p, u)


def compensation_current(p: DevicePayload, yd: np.ndarray, u: np.ndarray) -> np.ndarray:
    if p.connection == "delta":
        return delta_compensation(p, yd, u)
    return wye_compensation(p, yd, u)


def scatter(
    entries: list[tuple[tuple[IndexKey, ...], np.ndarray]], index: IndexMap
) -> np.ndarray:
    """Sum device corrections into the variable partition; fixed entries are
    absorbed by the reference and dropped."""
    iv = np.zeros(index.n_variable, dtype=complex)
    for keys, values in entries:
        for key, value in zip(keys, values):
            slot = index.variable.get(key)
            if slot is not None:
                iv[slot] += value
    return iv
