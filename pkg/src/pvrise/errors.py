"""Exception hierarchy shared across the package."""


class PvRiseError(Exception):
    """Base class for all errors raised by pvrise."""


class ConfigError(PvRiseError, ValueError):
    """Invalid feeder configuration. The message starts with the field path."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class InvalidInputError(PvRiseError, ValueError):
    pass


class DegenerateDataError(PvRiseError, ValueError):
    """Raised when the data carry no information (constant predictor, identical values)."""


class InsufficientDataError(PvRiseError, ValueError):
    pass


class DatasetParseError(PvRiseError):
    def __init__(self, path, line, reason):
        self.path = path
        self.line = line
        self.reason = reason
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {reason}")


class DatasetValidationError(PvRiseError):
    """One or more rows violate the meter-sample invariants.

    ``rejects`` holds ``(path, line, reason)`` tuples, first offenders only.
    """

    def __init__(self, count, rejects):
        self.count = count
        self.rejects = list(rejects)
        head = "; ".join(f"{p}:{ln}: {r}" for p, ln, r in self.rejects[:5])
        super().__init__(f"{count} invalid sample(s): {head}")
