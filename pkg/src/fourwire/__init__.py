"""Unbalanced (up to four-wire) power flow via fixed-point current injection."""

from .errors import (
    DanglingTerminalRef,
    DimensionMismatch,
    DisconnectedTerminal,
    DuplicateId,
    FourwireError,
    IndexOutOfBounds,
    ModelError,
    NoReferenceBus,
    NonFinite,
    ParseError,
    SingularMatrix,
    TerminalSetMismatch,
    UnsupportedConfiguration,
    VoltageCollapse,
    ZeroReferenceVoltage,
)
from .network import (
    AuxRef,
    Bus,
    Component,
    DevicePayload,
    IdealTransformerPayload,
    IndexMap,
    LinePayload,
    NetworkModel,
    SwitchPayload,
    TerminalRef,
    TwoWindingTransformerPayload,
    balanced_phasors,
    build_network,
    fixed_voltage_vector,
    index_terminals,
    reference_bus,
)
from .solver import Solution, SolverConfig, solve_network

__all__ = [
    "AuxRef",
    "Bus",
    "Component",
    "DevicePayload",
    "IdealTransformerPayload",
    "IndexMap",
    "LinePayload",
    "NetworkModel",
    "Solution",
    "SolverConfig",
    "SwitchPayload",
    "TerminalRef",
    "TwoWindingTransformerPayload",
    "balanced_phasors",
    "build_network",
    "fixed_voltage_vector",
    "index_terminals",
    "reference_bus",
    "solve_network",
    # errors
    "FourwireError",
    "ModelError",
    "DuplicateId",
    "DanglingTerminalRef",
    "NoReferenceBus",
    "DisconnectedTerminal",
    "UnsupportedConfiguration",
    "ZeroReferenceVoltage",
    "DimensionMismatch",
    "IndexOutOfBounds",
    "SingularMatrix",
    "VoltageCollapse",
    "NonFinite",
    "ParseError",
    "TerminalSetMismatch",
]
