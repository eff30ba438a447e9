"""
Pages module for the report viewer
"""

from . import overview, schedule, tradeoffs

__all__ = [
    'overview',
    'schedule',
    'tradeoffs',
]
