"""Rational laminations, combinatorial puzzles, mapping schemata and schema polynomial dynamics."""

from .circle import angle, fmt
from .lamination import FiniteLamination, PuzzleTower, verify_lamination, verify_tower
from .schema import MappingSchema

__version__ = "0.1.0"

__all__ = ["FiniteLamination", "MappingSchema", "PuzzleTower", "angle", "fmt", "verify_lamination",
           "verify_tower", "__version__"]
