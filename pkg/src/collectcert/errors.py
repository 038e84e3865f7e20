"""Shared exception types."""


class InputError(ValueError):
    """Invalid user-supplied data: files, schemas, or domain invariants."""


class MonotonicityError(RuntimeError):
    """A certification oracle violated the budget-monotonicity assumption."""
