import cmath
import math

import numpy as np
import pytest

import fourwire as fw
from fourwire.network import (
    AuxRef,
    TerminalRef as T,
    balanced_phasors,
    is_fixed_terminal,
)


def test_balanced_phasors_values():
    p = balanced_phasors(["a", "b", "c", "n"])
    assert p["a"] == pytest.approx(1 + 0j)
    assert p["b"] == pytest.approx(cmath.rect(1, math.radians(-120)))
    assert p["c"] == pytest.approx(cmath.rect(1, math.radians(120)))
    assert p["n"] == 0j
    assert abs(sum(p.values())) < 1e-15


def test_balanced_phasors_magnitude():
    p = balanced_phasors(["a"], magnitude=2.5)
    assert abs(p["a"]) == pytest.approx(2.5)


class TestBus:
    def test_valid(self):
        b = fw.Bus("b1", ("a", "b", "c", "n"), grounded=["n"])
        assert b.grounded == frozenset({"n"})
        assert not b.is_reference

    def test_unknown_label(self):
        with pytest.raises(fw.ModelError, match="unknown terminal label"):
            fw.Bus("b1", ("a", "x"))

    def test_duplicate_labels(self):
        with pytest.raises(fw.ModelError, match="duplicate"):
            fw.Bus("b1", ("a", "a"))

    def test_empty(self):
        with pytest.raises(fw.ModelError, match="1..4 terminals"):
            fw.Bus("b1", ())

    def test_grounded_not_subset(self):
        with pytest.raises(fw.ModelError, match="grounded"):
            fw.Bus("b1", ("a",), grounded=["n"])

    def test_bad_vbase(self):
        with pytest.raises(fw.ModelError, match="vbase"):
            fw.Bus("b1", ("a",), vbase=0.0)

    def test_fixed_phasor_unknown_terminal(self):
        with pytest.raises(fw.ModelError, match="fixed phasor"):
            fw.Bus("b1", ("a",), fixed_phasors={"b": 1 + 0j})

    def test_reference_bus_defaults(self):
        b = fw.reference_bus("src", ["a", "b", "c", "n"], grounded=["n"])
        assert b.is_reference
        assert b.fixed_phasors["a"] == pytest.approx(1 + 0j)
        assert b.fixed_phasors["n"] == 0j


class TestLinePayload:
    def test_asymmetric_rejected(self):
        with pytest.raises(fw.ModelError, match="symmetric"):
            fw.LinePayload(ys=np.array([[1.0, 2.0], [3.0, 1.0]]))

    def test_zero_row_rejected(self):
        ys = np.array([[1.0, 0.0], [0.0, 0.0]])
        with pytest.raises(fw.ModelError, match="all-zero row"):
            fw.LinePayload(ys=ys)

    def test_too_many_wires(self):
        with pytest.raises(fw.ModelError, match="at most 4"):
            fw.LinePayload(ys=np.eye(5))

    def test_non_square(self):
        with pytest.raises(fw.ModelError, match="square"):
            fw.LinePayload(ys=np.ones((2, 3)))

    def test_shunt_dimension(self):
        with pytest.raises(fw.ModelError, match="shunt"):
            fw.LinePayload(ys=np.eye(2), ysh_from=np.eye(3))

    def test_defaults(self):
        p = fw.LinePayload(ys=np.eye(3) * (1 - 2j))
        assert p.n_wires == 3
        assert not p.ysh_from.any() and not p.ysh_to.any()


class TestSwitchPayload:
    def test_bounds(self):
        assert fw.SwitchPayload(n_wires=4).closed
        with pytest.raises(fw.ModelError):
            fw.SwitchPayload(n_wires=0)
        with pytest.raises(fw.ModelError):
            fw.SwitchPayload(n_wires=5)


class TestIdealTransformerPayload:
    def test_terminal_counts(self):
        assert fw.IdealTransformerPayload(2.0, "none").n_terminals == 4
        assert fw.IdealTransformerPayload(2.0, "sending").n_terminals == 3
        assert fw.IdealTransformerPayload(2.0, "both").n_terminals == 2

    def test_bad_ratio(self):
        with pytest.raises(fw.ModelError, match="ratio"):
            fw.IdealTransformerPayload(0.0, "both")

    def test_bad_grounding(self):
        with pytest.raises(fw.ModelError, match="grounding"):
            fw.IdealTransformerPayload(1.0, "receiving")


class TestTwoWindingPayload:
    def test_zero_series_impedance(self):
        with pytest.raises(fw.UnsupportedConfiguration, match="zero series"):
            fw.TwoWindingTransformerPayload("wye_grounded", "wye_grounded", 1.0, 0)

    def test_unknown_config(self):
        with pytest.raises(fw.UnsupportedConfiguration):
            fw.TwoWindingTransformerPayload("zigzag", "wye_grounded", 1.0, 0.1j)

    def test_terminal_counts(self):
        p = fw.TwoWindingTransformerPayload("wye_floating", "delta", 1.0, 0.1j)
        assert p.n_from == 4
        assert p.n_to == 3


class TestDevicePayload:
    def test_wye_defaults(self):
        p = fw.DevicePayload("wye", "constant_power", np.array([1 + 1j, 2, 3]))
        assert p.n_phases == 3
        assert p.n_terminals == 3
        assert np.allclose(p.u_ref, 1.0)

    def test_delta_default_u_ref(self):
        p = fw.DevicePayload("delta", "constant_power", np.ones(3))
        assert np.allclose(p.u_ref, math.sqrt(3.0))
        assert p.n_terminals == 3

    def test_explicit_neutral_adds_terminal(self):
        p = fw.DevicePayload("wye", "constant_power", np.ones(2), explicit_neutral=True)
        assert p.n_terminals == 3

    def test_delta_needs_three(self):
        with pytest.raises(fw.ModelError, match="exactly 3"):
            fw.DevicePayload("delta", "constant_power", np.ones(2))

    def test_delta_no_neutral(self):
        with pytest.raises(fw.ModelError, match="neutral"):
            fw.DevicePayload("delta", "constant_power", np.ones(3), explicit_neutral=True)

    def test_wye_phase_count(self):
        with pytest.raises(fw.ModelError, match="1..3"):
            fw.DevicePayload("wye", "constant_power", np.ones(4))

    def test_exponential_requires_exponents(self):
        with pytest.raises(fw.ModelError, match="xp and xq"):
            fw.DevicePayload("wye", "exponential", np.ones(3))

    def test_exponent_shape(self):
        with pytest.raises(fw.ModelError, match="exponents"):
            fw.DevicePayload("wye", "exponential", np.ones(3), xp=[1.0], xq=[1.0, 1.0, 1.0])

    def test_bad_u_ref(self):
        with pytest.raises(fw.ModelError, match="positive"):
            fw.DevicePayload("wye", "constant_power", np.ones(1), u_ref=[0.0])

    def test_unknown_model(self):
        with pytest.raises(fw.ModelError, match="model"):
            fw.DevicePayload("wye", "constant_admittance", np.ones(1))


def _two_bus(**kw):
    src = fw.reference_bus("src", ["a"])
    ld = fw.Bus("ld", ("a",))
    line = fw.Component("l1", ((T("src", "a")), T("ld", "a")), fw.LinePayload(ys=np.array([[1.0]])))
    return [src, ld], [line]


class TestBuildNetwork:
    def test_duplicate_bus_id(self):
        buses, comps = _two_bus()
        with pytest.raises(fw.DuplicateId):
            fw.build_network(buses + [fw.Bus("src", ("a",))], comps)

    def test_duplicate_component_id(self):
        buses, comps = _two_bus()
        with pytest.raises(fw.DuplicateId):
            fw.build_network(buses, comps + comps)

    def test_component_id_clashes_with_bus(self):
        buses, comps = _two_bus()
        bad = fw.Component(
            "src", (T("src", "a"), T("ld", "a")), fw.LinePayload(ys=np.array([[1.0]]))
        )
        with pytest.raises(fw.DuplicateId):
            fw.build_network(buses, comps + [bad])

    def test_no_reference(self):
        a = fw.Bus("a1", ("a",))
        b = fw.Bus("b1", ("a",))
        line = fw.Component("l1", ((T("a1", "a")), T("b1", "a")), fw.LinePayload(ys=np.array([[1.0]])))
        with pytest.raises(fw.NoReferenceBus):
            fw.build_network([a, b], [line])

    def test_multiple_references(self):
        buses, comps = _two_bus()
        extra = fw.reference_bus("src2", ["a"])
        link = fw.Component(
            "l2", (T("ld", "a"), T("src2", "a")), fw.LinePayload(ys=np.array([[1.0]]))
        )
        with pytest.raises(fw.ModelError, match="multiple reference"):
            fw.build_network(buses + [extra], comps + [link])

    def test_dangling_terminal(self):
        buses, _ = _two_bus()
        bad = fw.Component(
            "l1", (T("src", "a"), T("nowhere", "a")), fw.LinePayload(ys=np.array([[1.0]]))
        )
        with pytest.raises(fw.DanglingTerminalRef):
            fw.build_network(buses, [bad])

    def test_dangling_phase(self):
        buses, _ = _two_bus()
        bad = fw.Component(
            "l1", (T("src", "a"), T("ld", "b")), fw.LinePayload(ys=np.array([[1.0]]))
        )
        with pytest.raises(fw.DanglingTerminalRef):
            fw.build_network(buses, [bad])

    def test_conn_length_mismatch(self):
        buses, _ = _two_bus()
        bad = fw.Component("l1", (T("src", "a"),), fw.LinePayload(ys=np.array([[1.0]])))
        with pytest.raises(fw.ModelError, match="terminal"):
            fw.build_network(buses, [bad])

    def test_disconnected_terminal(self):
        buses, comps = _two_bus()
        island = fw.Bus("island", ("a",))
        with pytest.raises(fw.DisconnectedTerminal, match="island"):
            fw.build_network(buses + [island], comps)

    def test_topology_sets(self):
        buses, comps = _two_bus()
        net = fw.build_network(buses, comps)
        assert net.reference_bus == "src"
        assert set(net.bus_terminals) == {T("src", "a"), T("ld", "a")}
        assert net.component_buses == {("l1", "src"), ("l1", "ld")}
        assert net.component_terminals == (("l1", "src", "a"), ("l1", "ld", "a"))

    def test_reference_missing_phasor(self):
        src = fw.Bus("src", ("a", "b"), fixed_phasors={"a": 1 + 0j})
        ld = fw.Bus("ld", ("a", "b"))
        line = fw.Component(
            "l1",
            (T("src", "a"), T("src", "b"), T("ld", "a"), T("ld", "b")),
            fw.LinePayload(ys=np.eye(2) + 0.1),
        )
        with pytest.raises(fw.ModelError, match="lacks phasors"):
            fw.build_network([src, ld], [line])


class TestIndexing:
    def _net(self):
        src = fw.reference_bus("src", ["a", "b", "c", "n"], grounded=["n"])
        ld = fw.Bus("ld", ("a", "b", "c", "n"))
        line = fw.Component(
            "l1",
            tuple(T("src", p) for p in "abcn") + tuple(T("ld", p) for p in "abcn"),
            fw.LinePayload(ys=np.linalg.inv(np.eye(4) * 0.1 + 0.01)),
        )
        return fw.build_network([src, ld], [line])

    def test_partition(self):
        net = self._net()
        index = fw.index_terminals(net)
        assert index.n_fixed == 4  # three phasors + grounded neutral
        assert index.n_variable == 4
        assert T("src", "n") in index.fixed
        assert T("ld", "n") in index.variable
        part, slot = index.partition_of(T("src", "a"))
        assert part == "fixed" and slot == index.fixed[T("src", "a")]

    def test_deterministic(self):
        net = self._net()
        a = fw.index_terminals(net)
        b = fw.index_terminals(net)
        assert a.fixed == b.fixed and a.variable == b.variable

    def test_aux_appended(self):
        src = fw.reference_bus("src", ["a"])
        sec = fw.Bus("sec", ("a",))
        tf = fw.Component(
            "t1", (T("src", "a"), T("sec", "a")), fw.IdealTransformerPayload(2.0, "both")
        )
        dev = fw.Component(
            "d1", (T("sec", "a"),), fw.DevicePayload("wye", "constant_impedance", np.ones(1))
        )
        net = fw.build_network([src, sec], [tf, dev])
        index = fw.index_terminals(net)
        assert AuxRef("t1") in index.variable
        # auxiliaries come after all bus terminals
        assert index.variable[AuxRef("t1")] == index.n_variable - 1

    def test_fixed_voltage_vector(self):
        net = self._net()
        index = fw.index_terminals(net)
        uf = fw.fixed_voltage_vector(net, index)
        assert uf[index.fixed[T("src", "a")]] == pytest.approx(1 + 0j)
        assert uf[index.fixed[T("src", "n")]] == 0j  # grounded

    def test_is_fixed_terminal(self):
        src = fw.reference_bus("src", ["a", "n"], grounded=["n"])
        assert is_fixed_terminal(src, "a")
        assert is_fixed_terminal(src, "n")
        assert not is_fixed_terminal(fw.Bus("b", ("a",)), "a")
