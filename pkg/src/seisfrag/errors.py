"""Exception hierarchy. The three bases map onto the CLI exit codes."""


class SeisfragError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class ConfigurationError(SeisfragError):
    """Invalid configuration, parameters, or moment-matching targets."""

    exit_code = 1


class DataError(SeisfragError):
    """Invalid, degenerate, or unreadable input data."""

    exit_code = 2


class NumericalError(SeisfragError):
    """Solver/iteration failure (root finding, Newton, optimization)."""

    exit_code = 3


class MomentMatchError(ConfigurationError):
    """No feasible shape parameters for a requested marginal mean/std."""


class BandwidthError(ConfigurationError):
    """Kernel bandwidth is not positive (1-D) or not SPD (2-D)."""


class InfeasibleDescriptorError(NumericalError):
    """Energy descriptors outside the achievable range of the modulating function."""


class IntegrationError(NumericalError):
    """Time integration failed to converge."""


class FormatError(DataError):
    """Malformed motion or records file."""


class DegenerateDataError(DataError):
    """Data cannot identify the requested fit (e.g. all failures)."""


class EnsembleError(DataError):
    """Too many bootstrap replicates failed."""
