"""Exception and warning classes shared across the package."""


class UndefinedModelError(ValueError):
    """The requested quantity does not exist for these parameters (e.g. no drive)."""


class NonPhysicalError(ValueError):
    pass


class ResolutionError(ValueError):
    """Frequency or time grid is too coarse for the requested operation."""


class PeakFindingError(RuntimeError):
    def __init__(self, found, wanted=3):
        super().__init__(f"found {found} peak(s), need {wanted}")
        self.found = found
        self.wanted = wanted


class DegenerateFitError(RuntimeError):
    """Curvature matrix is singular: the data do not constrain the parameters."""


class ResolutionWarning(UserWarning):
    pass


class ValidityWarning(UserWarning):
    """Model evaluated outside the regime where its approximation holds."""
