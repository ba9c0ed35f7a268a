"""Exception hierarchy.  Each class carries the CLI exit code it maps to."""


class StochBifError(Exception):
    exit_code = 1


class ConfigError(StochBifError, ValueError):
    """Invalid parameters, detected before any computation starts."""

    exit_code = 2


class UnknownSystemError(ConfigError, KeyError):
    def __str__(self):
        return self.args[0] if self.args else "unknown system"


class NumericalError(StochBifError, ArithmeticError):
    """A solver failure.  ``context`` names the failing (r, x0) when known."""

    exit_code = 3

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context

    def __str__(self):
        msg = super().__str__()
        if self.context:
            where = ", ".join(f"{k}={v!r}" for k, v in sorted(self.context.items()))
            return f"{msg} ({where})"
        return msg


class SingularSystemError(NumericalError):
    pass


class VanishedMassError(NumericalError):
    pass


class OutputError(StochBifError, OSError):
    exit_code = 4
