"""Exception hierarchy shared by the library and the CLI."""

from __future__ import annotations


class RestakingError(Exception):
    """Base class for every error raised by this package."""


class InputError(RestakingError, ValueError):
    """Malformed or semantically invalid input (CLI exit code 2)."""


class DegenerateInputError(InputError):
    """A quantity the model divides by is zero, e.g. a service with no backing stake."""


class PreconditionError(InputError):
    """An operation was asked to run outside the inputs it is guaranteed for."""


class CapacityError(RestakingError):
    """Exhaustive search refused because the instance exceeds a size cap (exit code 3)."""


class ValidationError(RestakingError):
    """A division plan is malformed; ``offenders`` lists what was wrong."""

    def __init__(self, message: str, offenders: list[str] | None = None):
        self.offenders = list(offenders or [])
        if self.offenders:
            message = message + ": " + "; ".join(self.offenders)
        super().__init__(message)


class InsecureError(RestakingError):
    """An input that must be secure is not. Carries the refuting verdict."""

    def __init__(self, message: str, verdict=None):
        super().__init__(message)
        self.verdict = verdict
