"""Long-range percolation on the hierarchical lattice of order N."""

from hierperc.errors import (
    ExactRangeError,
    InfeasibleScaleError,
    InvalidInputError,
    RegimeError,
)
from hierperc.hierarchy import Address, distance
from hierperc.profiles import ConnectionProfile, Constant, LogPoly, ScaledLog, Table
from hierperc.sampler import GraphRealization, largest_cluster, realize_ball

__all__ = [
    "Address",
    "ConnectionProfile",
    "Constant",
    "ExactRangeError",
    "GraphRealization",
    "InfeasibleScaleError",
    "InvalidInputError",
    "LogPoly",
    "RegimeError",
    "ScaledLog",
    "Table",
    "distance",
    "largest_cluster",
    "realize_ball",
]

__version__ = "0.1.0"
