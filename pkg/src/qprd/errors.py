"""Exception taxonomy.

Two families matter to callers: configuration/validation problems (CLI exit
code 1) and numerical failures discovered mid-computation (CLI exit code 2).
"""


class ValidationError(ValueError):
    """Invalid user input: bad config fields, violated preconditions of the
    documented kind (wrong preset, dt above the stability bound, ...)."""


class ConfigurationError(ValidationError):
    """A spec/bc/preset combination that cannot be built."""


class PreconditionError(ValidationError):
    """An operation's mathematical precondition does not hold (e.g. asking for
    a backward supremum when the exponent is not near zero)."""


class NumericalError(RuntimeError):
    """A computation failed numerically (did not converge, produced non-finite
    values, violated a structural property of the scheme)."""


class BlowupError(NumericalError):
    """The evolved field left the finite range (overflow/NaN)."""


class EvaluationError(NumericalError):
    """An observable or coefficient returned a non-finite value; carries the
    offending time."""

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


class SchemeViolationError(NumericalError):
    """A property the discrete scheme guarantees (monotone pullback,
    nondecreasing sweep) failed beyond tolerance; indicates a bug or a broken
    configuration rather than ordinary numerical error."""


class CalibrationError(NumericalError):
    """Exponent calibration failed to converge; carries diagnostics."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
