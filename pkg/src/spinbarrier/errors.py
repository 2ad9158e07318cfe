"""Exception hierarchy. Each category maps to a CLI exit code."""


class SpinBarrierError(Exception):
    exit_code = 1


class ConfigError(SpinBarrierError, ValueError):
    """Invalid configuration: missing file, unknown key, bad value, broken invariant."""

    exit_code = 2

    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key {key!r}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.key = key
        self.line = line


class ConfigFileError(ConfigError):
    """The config file is missing or unreadable."""


class SchemaError(ConfigError):
    """Syntax error, unknown section or key, or a value of the wrong type or range."""


class ConfigInvariantError(ConfigError):
    """Values that parse individually but violate a model invariant together."""


class DriftError(SpinBarrierError, RuntimeError):
    """Norm or trace drift beyond the hard limit; the step size is too large."""

    exit_code = 3


class ScientificFailure(SpinBarrierError, RuntimeError):
    """A flagged physics check: revival below threshold, decay fit failure."""

    exit_code = 4


class OutputError(SpinBarrierError, OSError):
    """Unwritable output location or unreadable/malformed input data file."""

    exit_code = 5
