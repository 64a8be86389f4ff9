"""
Shared utilities: validation errors, logging setup and report export.
"""

from reni.utils.validation import NonFiniteLossError, ValidationError

__all__ = [
    'NonFiniteLossError',
    'ValidationError',
]
