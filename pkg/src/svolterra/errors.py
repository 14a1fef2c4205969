"""Shared exception types."""


class NumericalError(RuntimeError):
    """A numerical procedure failed: trajectory explosion, a fixed-point
    solve that does not contract, or an iteration that hit its cap."""
