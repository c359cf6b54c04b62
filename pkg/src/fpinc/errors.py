"""Exception hierarchy.

Everything a caller can trigger with bad input derives from ``DataError``
(CLI exit code 2). ``InvariantViolation`` is reserved for internal
consistency checks that should never fire (CLI exit code 3).
"""


class FpincError(Exception):
    pass


class DataError(FpincError, ValueError):
    pass


class InvariantViolation(FpincError):
    pass


class ZeroInverseError(DataError, ZeroDivisionError):
    pass


class DegeneratePairError(DataError):
    pass


class CollinearError(DataError):
    pass


class TooFewPointsError(DataError):
    pass


class EmptyIncidenceError(DataError):
    pass


class ApexError(DataError):
    pass


class DegreeClassError(DataError):
    pass


class NoCandidateError(DataError):
    pass


class NoValidLineError(DataError):
    pass


class EmptyRError(DataError):
    pass


class NonAffineImageError(DataError):
    pass


class LambdaDegenerateError(DataError):
    pass


class DivisionByZeroEdgeError(DataError, ZeroDivisionError):
    def __init__(self, edges):
        self.edges = list(edges)
        super().__init__(f"division by zero on edges {self.edges}")


class NoSelectionError(DataError):
    def __init__(self, message, best_fraction=None):
        self.best_fraction = best_fraction
        super().__init__(message)


class DensityError(DataError):
    pass


class EmptySetError(DataError):
    pass


class OversizeError(DataError):
    pass
