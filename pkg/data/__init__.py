"""
Data module for the HURRY simulator
Model descriptions, hardware configs and lowering to functional blocks
"""

from .model_loader import load_model, parse_model, model_hash
from .hardware import load_hardware, parse_hardware

__all__ = [
    'load_model',
    'parse_model',
    'model_hash',
    'load_hardware',
    'parse_hardware',
]
