"""Exceptions used in disaggpool."""

from __future__ import annotations

from typing import TYPE_CHECKING, Optional

if TYPE_CHECKING:
    from .allocator import Solution


class Error(Exception):
    """Base error class."""


class DomainError(Error, ValueError):
    """Raised when an argument lies outside an operation's domain."""


class ConfigurationError(Error):
    """Raised when an inventory or experiment configuration is inconsistent."""


class InfeasibleProblemError(Error):
    """Raised when a problem can never be solved, whatever the assignment."""


class BudgetExceededError(Error):
    """Raised when an optimal solution is required but the search budget ran out."""

    def __init__(self, message: str, incumbent: Optional[Solution] = None) -> None:
        super().__init__(message)
        self.incumbent = incumbent
