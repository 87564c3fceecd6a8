"""
Exception hierarchy for murssl.

Every error raised on purpose by the library derives from MursslError so the
CLI can turn it into a one-line diagnostic.
"""

from typing import Optional, Sequence


class MursslError(Exception):
    """Base class for all murssl errors."""


class ShapeError(MursslError, ValueError):
    """Operand shapes are incompatible for an operation."""

    def __init__(self, op: str, left: Sequence[int], right: Optional[Sequence[int]] = None,
                 detail: str = ""):
        self.op = op
        self.left = tuple(left)
        self.right = tuple(right) if right is not None else None
        message = f"{op}: incompatible shapes {self.left}"
        if self.right is not None:
            message += f" and {self.right}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class NumericalError(MursslError, ArithmeticError):
    """A non-finite value appeared during evaluation or optimization."""


class DegenerateGradientError(NumericalError):
    """The entropy gradient is too small to define a direction."""

    def __init__(self, norm: float, rows: Optional[Sequence[int]] = None):
        self.norm = norm
        self.rows = list(rows) if rows is not None else []
        super().__init__(f"degenerate entropy gradient (norm {norm:.3e})")


class UsageError(MursslError, RuntimeError):
    """An API was called in a state or with arguments it does not support."""


class ConfigError(MursslError, ValueError):
    """Configuration values are invalid or inconsistent."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__(
            "Configuration validation failed:\n" + "\n".join(f"- {p}" for p in self.problems)
        )
