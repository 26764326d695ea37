"""Exception hierarchy; each family maps onto a CLI exit code."""


class RogueSensorError(Exception):
    exit_code = 1


class ConfigError(RogueSensorError, ValueError):
    exit_code = 2


class MissingArtifactError(ConfigError):
    pass


class DataError(RogueSensorError, ValueError):
    exit_code = 3


class DegenerateDatasetError(DataError):
    pass


class NumericError(RogueSensorError, ArithmeticError):
    exit_code = 4


class NoKneeError(NumericError):
    pass
