"""
Error hierarchy for the toolkit.

Everything derives from ToolkitError, itself a ValueError, so callers that
only care about "bad input" can keep catching ValueError.
"""
from typing import Dict, List, Optional


class ToolkitError(ValueError):
    """Base class for all toolkit errors"""


class DomainError(ToolkitError):
    """A numeric argument lies outside the domain of the operation"""


class BracketError(ToolkitError):
    """A root-finding bracket does not contain a sign change"""


class GridError(ToolkitError):
    """Detector grids, cutoffs or bin widths are inconsistent"""


class ContractError(ToolkitError):
    """Criterion inputs violate their contract (unnormalized, negative, ...)"""


class DegenerateInputError(ToolkitError):
    """Input carries no usable information (nothing detected, no events)"""


class ConfigError(ToolkitError):
    """Run configuration failed validation"""

    def __init__(self, message: str, field_errors: Optional[List[Dict[str, str]]] = None):
        super().__init__(message)
        self.field_errors = field_errors or []

    def __str__(self) -> str:
        if not self.field_errors:
            return super().__str__()
        details = "; ".join(f"{e['field']}: {e['message']}" for e in self.field_errors)
        return f"{super().__str__()} ({details})"
