"""Exception hierarchy.

Errors fall in three families which the CLI maps onto exit codes:
bad input (2), refuted compatibility (1), and internal limits of the
decision procedures or of the numerics (3).
"""

from __future__ import annotations


class HydroError(Exception):
    """Base class for every error raised by hydropencil."""


class InputError(HydroError):
    """The caller supplied data the operation cannot accept."""


class LimitError(HydroError):
    """A procedure hit a limit of what it can decide or compute."""


class Refutation(HydroError):
    """The input was processed and shown not to have the requested structure."""


# --- expressions -----------------------------------------------------------

class ExprSyntaxError(InputError):
    def __init__(self, message: str, text: str = "", pos: int = 0):
        self.text = text
        self.pos = pos
        if text:
            message = f"{message} at position {pos}\n  {text}\n  {' ' * pos}^"
        super().__init__(message)


class UnknownIdentifier(InputError):
    pass


class ContextMismatch(InputError):
    pass


class DivisionByZero(InputError, ZeroDivisionError):
    pass


class DivisionByZeroConstant(DivisionByZero):
    pass


class SubstitutionPole(InputError):
    pass


class NumericPole(LimitError):
    pass


# --- geometry / operators ----------------------------------------------------

class DegenerateMetric(InputError):
    pass


class DegeneratePencil(InputError):
    pass


class NonConstantEta(InputError):
    pass


class InvalidMap(InputError):
    pass


class NotFlat(InputError):
    pass


class NotIntegrable(Refutation):
    pass


class GMismatch(Refutation):
    pass


class NonPolynomial(LimitError):
    pass


# --- hierarchy / sim ---------------------------------------------------------

class NotExact(LimitError):
    def __init__(self, message: str, step: int | None = None):
        self.step = step
        super().__init__(message)


class OddGridSpectral(InputError):
    pass


class BlowUp(LimitError):
    def __init__(self, message: str, time: float):
        self.time = time
        super().__init__(message)


class ManifestError(InputError):
    pass
