"""Exception hierarchy.

Every error carries the CLI exit code it maps to: 2 for configuration and
usage problems, 3 for malformed input data, 4 for violated numeric
contracts.
"""


class NcAdjustError(Exception):
    exit_code = 1


class ConfigError(NcAdjustError, ValueError):
    exit_code = 2


class DataFormatError(NcAdjustError, ValueError):
    exit_code = 3


class ParseError(DataFormatError):
    """Malformed feature file; the message names the offending row or byte offset."""


class StatsError(DataFormatError):
    """Class statistics that violate the count/norm preconditions."""


class NumericContractError(NcAdjustError, ValueError):
    exit_code = 4


class DegenerateEtfError(NumericContractError):
    pass


class DimensionError(NumericContractError):
    pass


class DomainError(NumericContractError):
    pass


class ContractError(NumericContractError):
    pass


class ParameterError(NumericContractError):
    pass


class ProfileError(NumericContractError):
    pass


class WindowError(NumericContractError):
    """Angle outside the validity window of the angular bound."""

    def __init__(self, message, lo=None, hi=None):
        super().__init__(message)
        self.lo = lo
        self.hi = hi
