"""Exception types shared across the package."""


class DomainError(ValueError):
    """Invalid argument: bad shape, out-of-range value, non-finite input."""


class NumericalError(ArithmeticError):
    """A factorization or solve broke down.

    Attributes
    ----------
    pivot : int or None
        One-based index of the failing Cholesky pivot, when known.
    iteration : int or None
        Outer training iteration at which the failure happened, filled in
        by the trainer.
    """

    def __init__(self, message, pivot=None, iteration=None):
        super().__init__(message)
        self.pivot = pivot
        self.iteration = iteration


class IngestionError(ValueError):
    """A data file could not be turned into a valid dataset."""


class UnsupportedVersionError(ValueError):
    """Model document written with a format version this build cannot read."""


class CorruptModelError(ValueError):
    """Model document parsed but violates a structural invariant."""
