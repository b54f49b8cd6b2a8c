"""Quantitative transition systems, their bisimulations, and rule formats that induce them."""
from .monoid import (INF, Club, Monoid, MonoidError, builtin, enumerate_clubs, is_club, is_positive,
                     is_refinement, m4, z2)
from .weightfn import WeightFunction
from .ultras import Ultras, UltrasError, Wlts
from .bisim import Partition, coarsest_partition, is_bisimulation, largest_bisimulation, minimize

__all__ = [
    "INF", "Club", "Monoid", "MonoidError", "builtin", "enumerate_clubs", "is_club", "is_positive",
    "is_refinement", "m4", "z2", "WeightFunction", "Ultras", "UltrasError", "Wlts", "Partition",
    "coarsest_partition", "is_bisimulation", "largest_bisimulation", "minimize",
]

__version__ = "0.1.0"
