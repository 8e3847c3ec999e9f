"""Exception types raised across the package."""


class InvalidParameterError(ValueError):
    """A numeric parameter lies outside its admissible range."""


class RankDeficientError(ValueError):
    """A dictionary is (numerically) singular."""


class SizeCapError(ValueError):
    """An exact computation was requested beyond its enumeration cap."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap.

    Attributes
    ----------
    best_gap : float
        Smallest certified duality gap reached before giving up.
    """

    def __init__(self, message, best_gap):
        super().__init__(message)
        self.best_gap = best_gap
