"""Exception hierarchy with CLI exit codes attached.

Exit-code contract: 0 pass, 1 verification fail, 2 input error,
3 construction error, 4 resolution/mode error.
"""


class GapmeansError(Exception):
    exit_code = 2


class ParameterError(GapmeansError, ValueError):
    """Invalid parameter value (non-positive alpha, bad spec string, ...)."""
    exit_code = 2


class InputError(GapmeansError, ValueError):
    """Malformed or insufficient input data."""
    exit_code = 2


class MonotonicityError(InputError):
    """Sampled weight is not non-decreasing."""


class ConvexityError(InputError):
    """Sampled curve deviates from log-convexity beyond tolerance."""


class RangeError(GapmeansError, ValueError):
    """Argument outside the supported range (r >= 1, n above cap, ...)."""
    exit_code = 2


class DegenerateInputError(InputError):
    """Operation needs a richer object (e.g. a parity split of < 2 terms)."""


class ConstructionError(GapmeansError, RuntimeError):
    """Gap selection could not certify the series; carries the bad radius."""
    exit_code = 3

    def __init__(self, message, radius=None):
        super().__init__(message)
        self.radius = radius


class ResolutionError(GapmeansError, RuntimeError):
    """Sampled mode would need more circle points than the cap allows."""
    exit_code = 4


class AccuracyError(GapmeansError, RuntimeError):
    """Quadrature failed its convergence-on-doubling check."""
    exit_code = 4


class InconsistentInputsError(GapmeansError, ValueError):
    """Mutually contradictory numeric inputs (e.g. m2 > minf upper bound)."""
    exit_code = 2
