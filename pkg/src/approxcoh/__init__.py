"""Rank filtrations, Gowers norms and approximate cohomology over F_p."""

__version__ = "0.1.0"

from .errors import BudgetExceeded, EmptyLevelError, PreconditionError, StructureError
from .ffpoly import Poly, parse_poly
from .rank import rank

__all__ = [
    "__version__",
    "BudgetExceeded",
    "EmptyLevelError",
    "PreconditionError",
    "StructureError",
    "Poly",
    "parse_poly",
    "rank",
]
