"""
Exception hierarchy for interimcore.

Every error raised by the solver derives from InterimCoreError so the CLI
can map families of failures onto stable exit statuses.
"""
from typing import Any


class InterimCoreError(Exception):
    """Base class for all solver errors.

    `stage` names the pipeline stage that failed when the error escaped a
    multi-stage command such as solve.
    """
    stage: str | None = None


class StructuralError(InterimCoreError, ValueError):
    """Inputs are structurally inconsistent (state spaces, dimensions, supports)."""


class ValidationError(InterimCoreError, ValueError):
    """A problem or profile violates a standing hypothesis."""

    def __init__(self, message: str, violations: list[str] | None = None) -> None:
        super().__init__(message)
        self.violations: list[str] = list(violations or [])


class BudgetExceeded(InterimCoreError):
    """An enumeration would exceed its configured budget."""

    def __init__(self, what: str, estimate: int, budget: int) -> None:
        super().__init__(
            f"{what}: estimated {estimate} items exceeds budget {budget}"
        )
        self.what = what
        self.estimate = estimate
        self.budget = budget


class SolverError(InterimCoreError, RuntimeError):
    """A linear program failed in a way the model rules out."""

    def __init__(self, message: str, status: int | None = None) -> None:
        super().__init__(message)
        self.status = status


class ScarfError(InterimCoreError):
    """Base class for pivoting failures."""


class PivotBudgetExhausted(ScarfError):
    """The pivot budget ran out before an ordinal-feasible basis was reached."""

    def __init__(self, budget: int, last_primitive_set: list[int]) -> None:
        super().__init__(
            f"pivot budget {budget} exhausted; last primitive set {last_primitive_set}"
        )
        self.budget = budget
        self.last_primitive_set = last_primitive_set


class CoreNotAchievable(ScarfError):
    """Every terminal primitive set yields a payoff the grand coalition cannot reach."""

    def __init__(self, payoffs: list[Any]) -> None:
        super().__init__(
            f"no terminal payoff is achievable by the grand coalition "
            f"({len(payoffs)} starts tried)"
        )
        self.payoffs = payoffs


class ProblemFileError(InterimCoreError, ValueError):
    """A problem or report document could not be parsed."""

    def __init__(self, message: str, line: int | None = None) -> None:
        location = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{location}")
        self.line = line
