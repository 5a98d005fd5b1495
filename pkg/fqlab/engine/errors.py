"""
Exception hierarchy for the fqlab engine.

Every error raised by the engine derives from LabError, which is itself a
ValueError so callers validating plain inputs keep working unchanged.
BudgetExceeded is the only error a command is expected to survive: it marks
a search or enumeration that was cut short, never a wrong answer.
"""

from typing import Any, Optional


class LabError(ValueError):
    """Base class for all fqlab errors."""


# ─── Field Errors ───

class NotPrime(LabError):
    def __init__(self, p: int):
        super().__init__(f"Characteristic {p} is not a prime")
        self.p = p


class DegreeTooLarge(LabError):
    def __init__(self, p: int, m: int, cap: int):
        super().__init__(f"Field size {p}^{m} exceeds the cap of {cap} elements")
        self.p, self.m, self.cap = p, m, cap


class FieldMismatch(LabError):
    def __init__(self, left: Any, right: Any):
        super().__init__(f"Operands live in different fields: GF({left}) vs GF({right})")


class DivisionByZero(LabError, ZeroDivisionError):
    def __init__(self, what: str = "division"):
        super().__init__(f"{what} by the zero element")


class NotAnExtension(LabError):
    pass


# ─── Shape Errors ───

class DimensionMismatch(LabError):
    pass


class ModeOutOfRange(LabError):
    pass


class DuplicateMode(LabError):
    pass


class IndexOutOfRange(LabError):
    pass


class ShapeMismatch(LabError):
    pass


class OrderMismatch(LabError):
    pass


class BadSubset(LabError):
    pass


class OrderUnsupported(LabError):
    pass


# ─── Parameter Errors ───

class UnknownFamily(LabError):
    pass


class BadParams(LabError):
    pass


class EmptyInput(LabError):
    pass


class BadConstants(LabError):
    pass


class BadRange(LabError):
    pass


# ─── Search Outcomes ───

class BudgetExceeded(LabError):
    """
    Raised when an enumeration would need more work than its budget allows,
    or a search stopped before exhausting its space. `partial` carries the
    best verified intermediate result when one exists.
    """

    def __init__(self, what: str, required: int, budget: int, partial: Optional[Any] = None):
        super().__init__(f"{what} needs {required} units of work, budget is {budget}")
        self.what = what
        self.required = required
        self.budget = budget
        self.partial = partial


class InvariantViolation(LabError):
    """A hard inequality or exact identity failed. Always a bug."""


def require_budget(what: str, required: int, budget: int) -> None:
    """Raise BudgetExceeded when `required` exceeds `budget`."""
    if required > budget:
        raise BudgetExceeded(what, required, budget)
