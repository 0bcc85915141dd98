"""Error types raised by the simulator; the CLI maps all of them to exit code 2."""


class DCRBError(Exception):
    """Base class for every handled failure"""


class ParameterError(DCRBError, ValueError):
    """Out-of-range parameter, invalid qubit index or dimension mismatch"""


class CircuitValidationError(DCRBError):
    """Circuit violates an IR invariant (target range, conditional on unwritten bit)"""


class ConfigurationError(DCRBError):
    """Invalid block, DD, RB or noise configuration"""


class ResourceLimitError(DCRBError):
    """Exact enumeration would exceed the configured resource limit"""


class FitError(DCRBError):
    """Error rate requested from a fit that did not converge"""
