"""Exception types shared across the package."""


class NumericError(RuntimeError):
    """A numeric routine failed (e.g. an eigendecomposition did not converge)."""


class ConfigError(ValueError):
    """An experiment configuration is invalid; carries per-field messages."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class UnsupportedOperationError(RuntimeError):
    """The requested operation needs data the caller did not provide."""


class IngestionError(ValueError):
    """A data file could not be parsed; carries the offending location."""
