"""Error taxonomy shared by the library and the CLI.

Each class maps to one CLI exit status so callers can dispatch on the
exception type alone; messages are advisory.
"""


class PrivboundError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(PrivboundError):
    """An input violates a documented precondition on its own value."""

    exit_status = 2


class ResourceLimitError(InvalidArgumentError):
    """An input is valid but exceeds a documented computational cap."""

    exit_status = 2


class PreconditionError(PrivboundError):
    """A cross-input precondition failed (e.g. sample size below threshold).

    ``quantity`` names the offending parameter and ``required`` carries the
    value that would satisfy the precondition, so callers can adjust.
    """

    exit_status = 3

    def __init__(self, message, quantity=None, required=None):
        super().__init__(message)
        self.quantity = quantity
        self.required = required


class DegenerateBudgetError(PrivboundError):
    """A composed delta reached 1 or more; the budget carries no guarantee."""

    exit_status = 4


class DivergenceError(PrivboundError):
    """A simulated run produced non-finite parameters and was aborted."""

    exit_status = 1
