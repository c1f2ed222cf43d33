# License: BSD 3 clause
"""
Exceptions and warnings raised by DMCL.

Every exception derives from a builtin so that code catching the generic
``ValueError`` / ``RuntimeError`` family keeps working.
"""


class StabilityError(ValueError):
    """A step probability or a transition-matrix diagonal leaves ``[0, 1]``."""


class ConvergenceError(RuntimeError):
    """An iterative solver did not reach its target within the budget."""


class DegenerateError(ValueError):
    """A quantity underflowed before it could be estimated."""


class RangeError(ValueError):
    """A calibration target lies outside the bracketed range."""


class DriftError(ArithmeticError):
    """Column sums of a matrix power drifted away from one."""


class WindowError(ValueError):
    """An averaging window starts inside the ISI transient."""


class BudgetError(RuntimeError):
    """Projected simulation work exceeds the configured cap."""


class InsufficientDataError(ValueError):
    """Too few traces to estimate a statistic."""


class ConfigError(ValueError):
    """A configuration file is malformed or holds unknown/invalid options."""


class NumericalAssertionError(AssertionError):
    """A numerical cross-check (closed form, balance, drift) failed."""


class TruncationWarning(UserWarning):
    """Tap truncation hit ``L_max`` before reaching the tolerance."""
