"""Exception hierarchy shared by the library and the command line."""


class ExcitransError(Exception):
    pass


class CoincidentSitesError(ExcitransError, ValueError):
    """Two sites closer than the minimal-distance floor."""


class DimensionMismatchError(ExcitransError, ValueError):
    pass


class NumericalError(ExcitransError, ArithmeticError):
    """Base for failures of an iterative numerical routine (CLI exit code 3)."""


class NonConvergenceError(NumericalError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class SpectrumClassificationError(NumericalError):
    def __init__(self, message, weights=None):
        super().__init__(message)
        self.weights = weights


class MissingInputError(ExcitransError, FileNotFoundError):
    """An upstream pipeline artifact is absent (CLI exit code 2)."""


class SchemaVersionError(ExcitransError, ValueError):
    pass
