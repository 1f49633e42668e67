"""Exception hierarchy shared across the package."""


class FourwireError(Exception):
    """Base class for all errors raised by fourwire."""


class ModelError(FourwireError):
    """A network model failed validation."""


class DuplicateId(ModelError):
    pass


class DanglingTerminalRef(ModelError):
    pass


class NoReferenceBus(ModelError):
    pass


class DisconnectedTerminal(ModelError):
    pass


class UnsupportedConfiguration(ModelError):
    pass


class ZeroReferenceVoltage(ModelError):
    pass


class DimensionMismatch(FourwireError):
    pass


class IndexOutOfBounds(FourwireError):
    pass


class SingularMatrix(FourwireError):
    pass


class VoltageCollapse(FourwireError):
    """A device voltage denominator dropped below the collapse threshold."""


class NonFinite(FourwireError):
    """The iteration produced NaN/Inf or diverged beyond the magnitude cap."""


class ParseError(FourwireError):
    pass


class TerminalSetMismatch(FourwireError):
    pass
