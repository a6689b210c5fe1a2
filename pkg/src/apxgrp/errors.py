"""Exception hierarchy; the CLI maps each class to an exit code."""


class ApxGrpError(Exception):
    exit_code = 4


class UsageError(ApxGrpError, ValueError):
    """Bad arguments: mismatched ambient groups, malformed matrices, bad config."""

    exit_code = 2


class UnsupportedParameterError(UsageError):
    """Parameters outside what the exact algorithms support (e.g. p <= n)."""


class ResourceBudgetError(ApxGrpError):
    """A set or graph would exceed the configured element budget."""

    exit_code = 3


class InvariantViolation(ApxGrpError, AssertionError):
    exit_code = 4
