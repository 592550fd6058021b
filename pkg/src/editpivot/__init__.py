"""
editpivot

(c) Copyright editpivot developers 2024.
"""
from editpivot.generic_classes import PivotError
from editpivot.toolkit import PivotToolkit

__all__ = [
    "PivotError",
    "PivotToolkit"
]
