"""Exception hierarchy.

Input problems derive from :class:`DataError` (CLI exit code 1); numerical
failures derive from :class:`NumericalError` (CLI exit code 2).
"""


class CDBNError(Exception):
    """Base class for all package errors."""


class DataError(CDBNError, ValueError):
    """Malformed or inconsistent input files or arguments."""


class NumericalError(CDBNError, ArithmeticError):
    """A model could not be scored."""


class DesignRankError(NumericalError):
    """The augmented parent design matrix is not of full column rank.

    ``column`` is the tag of the first offending column and ``zero`` is true
    when that column vanished entirely (as opposed to being a linear
    combination of earlier columns).
    """

    def __init__(self, message, column=None, zero=False):
        super().__init__(message)
        self.column = column
        self.zero = zero


class LikelihoodError(NumericalError):
    """Nonpositive residual quadratic form or too few observations."""


class InferenceError(NumericalError):
    """Every candidate model for a node was excluded."""
