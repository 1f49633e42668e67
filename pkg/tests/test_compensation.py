import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import fourwire as fw
from fourwire.admittance import DELTA_M, device_admittance
from fourwire.compensation import (
    compensation_current,
    demanded_power,
    device_branch_currents,
    device_terminal_currents,
    phase_voltages,
    scatter,
)
from fourwire.errors import VoltageCollapse
from fourwire.network import TerminalRef as T, balanced_phasors


def _u(*values):
    return np.array(values, dtype=complex)


BAL3 = np.array(list(balanced_phasors(["a", "b", "c"]).values()))


class TestPhaseVoltages:
    def test_wye_kron(self):
        p = fw.DevicePayload("wye", "constant_power", np.ones(3))
        np.testing.assert_array_equal(phase_voltages(p, BAL3), BAL3)

    def test_wye_explicit_neutral(self):
        p = fw.DevicePayload("wye", "constant_power", np.ones(3), explicit_neutral=True)
        u = np.concatenate([BAL3, [0.05 + 0.01j]])
        np.testing.assert_allclose(phase_voltages(p, u), BAL3 - (0.05 + 0.01j))

    def test_delta(self):
        p = fw.DevicePayload("delta", "constant_power", np.ones(3))
        v = phase_voltages(p, BAL3)
        np.testing.assert_allclose(v, DELTA_M @ BAL3)
        np.testing.assert_allclose(np.abs(v), np.sqrt(3.0), atol=1e-14)


class TestDemandedPower:
    def test_constant_power_ignores_voltage(self):
        p = fw.DevicePayload("wye", "constant_power", _u(1 + 1j))
        np.testing.assert_array_equal(demanded_power(p, _u(0.5)), [1 + 1j])
        np.testing.assert_array_equal(demanded_power(p, _u(1.3j)), [1 + 1j])

    def test_constant_impedance_quadratic(self):
        p = fw.DevicePayload("wye", "constant_impedance", _u(2 + 1j))
        np.testing.assert_allclose(demanded_power(p, _u(0.5)), [(2 + 1j) * 0.25])

    def test_constant_current_linear(self):
        p = fw.DevicePayload("wye", "constant_current", _u(2 + 1j))
        np.testing.assert_allclose(demanded_power(p, _u(0.5)), [(2 + 1j) * 0.5])

    def test_exponential_split_exponents(self):
        p = fw.DevicePayload(
            "wye", "exponential", _u(2 + 1j), xp=[2.0], xq=[1.0]
        )
        s = demanded_power(p, _u(0.5))
        assert s[0] == pytest.approx(2 * 0.25 + 1j * 0.5)

    def test_u_ref_scaling(self):
        p = fw.DevicePayload("wye", "constant_current", _u(1.0), u_ref=[2.0])
        np.testing.assert_allclose(demanded_power(p, _u(1.0)), [0.5])


class TestBranchCurrents:
    def test_constant_power_kron_single_phase(self):
        # S = 1 pu on phase a, |U_a| = 0.9: the model draws conj(S/U) and the
        # correction against the unit linearization is 0.9 - 1/0.9.
        p = fw.DevicePayload("wye", "constant_power", _u(1, 0, 0))
        u = _u(0.9, 1, 1) * np.array([1, BAL3[1], BAL3[2]])
        i = device_branch_currents(p, u)
        assert i[0] == pytest.approx(1 / 0.9)
        assert i[1] == 0 and i[2] == 0
        yd = device_admittance(p)
        comp = compensation_current(p, yd, u)
        assert comp[0] == pytest.approx(0.9 - 1 / 0.9)  # -0.21111...
        assert abs(comp[0] - (-0.2111111111)) < 1e-9

    def test_collapse_guard(self):
        p = fw.DevicePayload("wye", "constant_power", _u(1.0))
        with pytest.raises(VoltageCollapse):
            device_branch_currents(p, _u(1e-9))

    def test_inactive_phase_ignores_zero_voltage(self):
        p = fw.DevicePayload("wye", "constant_power", _u(1.0, 0.0, 0.0))
        i = device_branch_currents(p, _u(1.0, 0.0, 0.0))
        assert i[0] == pytest.approx(1.0)
        assert i[1] == 0 and i[2] == 0

    def test_constant_impedance_skips_guard(self):
        p = fw.DevicePayload("wye", "constant_impedance", _u(1.0))
        i = device_branch_currents(p, _u(1e-9))
        assert abs(i[0]) < 1e-8


class TestTerminalCurrents:
    def test_explicit_neutral_balances(self):
        p = fw.DevicePayload(
            "wye", "constant_power", _u(1 + 0.3j, 0.8, 1.2 - 0.1j), explicit_neutral=True
        )
        u = np.concatenate([BAL3 * [0.95, 1.02, 0.9], [0.03 - 0.01j]])
        i = device_terminal_currents(p, u)
        assert len(i) == 4
        assert abs(i.sum()) < 1e-14

    def test_delta_sums_to_zero(self):
        p = fw.DevicePayload("delta", "constant_power", _u(1 + 0.3j, 0.8, 1.2 - 0.1j))
        i = device_terminal_currents(p, BAL3 * [0.95, 1.02, 0.9])
        assert len(i) == 3
        assert abs(i.sum()) < 1e-14

    def test_generator_reverses_current(self):
        load = fw.DevicePayload("wye", "constant_power", _u(1.0))
        gen = fw.DevicePayload("wye", "constant_power", _u(-1.0), is_generator=True)
        u = _u(1.0)
        np.testing.assert_allclose(
            device_terminal_currents(gen, u), -device_terminal_currents(load, u)
        )


class TestCompensation:
    def test_constant_impedance_is_exact(self):
        for p in (
            fw.DevicePayload("wye", "constant_impedance", _u(1 + 1j, 2, 3), explicit_neutral=True),
            fw.DevicePayload("delta", "constant_impedance", _u(1 + 1j, 2, 3)),
        ):
            yd = device_admittance(p)
            u = np.concatenate([BAL3, [0.01j]])[: p.n_terminals]
            comp = compensation_current(p, yd, u)
            np.testing.assert_array_equal(comp, 0)

    def test_vanishes_at_reference_voltage(self):
        # At u = u_ref the linearization reproduces the model exactly.
        p = fw.DevicePayload("wye", "constant_power", _u(2 - 1j, 1, 0.5))
        yd = device_admittance(p)
        comp = compensation_current(p, yd, BAL3)
        np.testing.assert_allclose(comp, 0, atol=1e-14)

    def test_delta_vanishes_at_reference_voltage(self):
        p = fw.DevicePayload("delta", "constant_power", _u(2 - 1j, 1, 0.5))
        yd = device_admittance(p)
        comp = compensation_current(p, yd, BAL3)
        np.testing.assert_allclose(comp, 0, atol=1e-14)


def _complex_strategy():
    part = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False)
    return st.builds(complex, part, part)


@settings(max_examples=200, deadline=None)
@given(
    s=st.lists(_complex_strategy(), min_size=3, max_size=3),
    du=st.lists(_complex_strategy(), min_size=4, max_size=4),
)
def test_en_wye_current_conservation(s, du):
    p = fw.DevicePayload("wye", "constant_power", np.array(s), explicit_neutral=True)
    u = np.concatenate([BAL3, [0j]]) + 0.05 * np.array(du)
    try:
        i = device_terminal_currents(p, u)
    except VoltageCollapse:
        return
    assert abs(i.sum()) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(
    s=st.lists(_complex_strategy(), min_size=3, max_size=3),
    du=st.lists(_complex_strategy(), min_size=3, max_size=3),
)
def test_delta_current_conservation(s, du):
    p = fw.DevicePayload("delta", "constant_current", np.array(s))
    u = BAL3 + 0.05 * np.array(du)
    try:
        i = device_terminal_currents(p, u)
    except VoltageCollapse:
        return
    assert abs(i.sum()) <= 1e-12


class TestScatter:
    def test_drops_fixed_and_sums(self):
        index = fw.IndexMap(
            fixed={T("src", "a"): 0},
            variable={T("ld", "a"): 0, T("ld", "n"): 1},
        )
        entries = [
            ((T("src", "a"), T("ld", "a")), np.array([5.0, 1 + 1j])),
            ((T("ld", "a"), T("ld", "n")), np.array([2.0, -3j])),
        ]
        iv = scatter(entries, index)
        np.testing.assert_array_equal(iv, [3 + 1j, -3j])

    def test_empty(self):
        index = fw.IndexMap(fixed={}, variable={T("ld", "a"): 0})
        np.testing.assert_array_equal(scatter([], index), [0j])
