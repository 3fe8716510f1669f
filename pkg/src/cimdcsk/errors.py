"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """A parameter, signal length or configuration value is out of contract."""


class NumericalFailureError(RuntimeError):
    """A quadrature or other numerical routine failed to converge."""

    def __init__(self, message, **diagnostics):
        self.diagnostics = diagnostics
        if diagnostics:
            detail = ", ".join(f"{k}={v!r}" for k, v in diagnostics.items())
            message = f"{message} ({detail})"
        super().__init__(message)
