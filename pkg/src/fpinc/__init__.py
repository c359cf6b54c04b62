"""Point-line incidences and partial sum-product experiments over prime fields."""

from .errors import DataError, FpincError, InvariantViolation
from .field import AffinePoint, AffLine, PlaneContext, ProjMap, ProjPoint
from .incidence import LineSet, PointSet, count_incidences, lines_determined, max_collinear
from .sumprod import GridInstance, check_partial_sumprod, check_rudnev, mult_energy

__version__ = "0.1.0"

__all__ = [
    "AffLine", "AffinePoint", "DataError", "FpincError", "GridInstance", "InvariantViolation",
    "LineSet", "PlaneContext", "PointSet", "ProjMap", "ProjPoint", "check_partial_sumprod",
    "check_rudnev", "count_incidences", "lines_determined", "max_collinear", "mult_energy",
]
