"""Exception types raised by the estimators."""


class MissCusumError(Exception):
    """Base class for algorithmic failures (as opposed to bad input)."""

    code = "error"


class DegeneratePenalty(MissCusumError):
    """The penalty is at least the largest row norm, so the optimal direction is 0.

    Lower the penalty below ``norm`` to get a non-trivial solution.
    """

    code = "degenerate_penalty"

    def __init__(self, lam: float, norm: float, message: str | None = None):
        self.lam = float(lam)
        self.norm = float(norm)
        super().__init__(
            message
            or f"penalty {self.lam:.6g} >= largest row norm {self.norm:.6g}; "
            "the penalised direction is identically zero"
        )


class ZeroVector(DegeneratePenalty):
    """Soft thresholding wiped out every coordinate during the iteration."""


class AllInvalid(MissCusumError):
    """No coordinate has observations on both sides of any split."""

    code = "all_invalid"
