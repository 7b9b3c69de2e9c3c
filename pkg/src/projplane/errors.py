"""Exception hierarchy shared by every module.

Validation problems (bad input, violated preconditions) derive from
:class:`ValidationError`; numerical breakdowns (divergence, singular
systems met during iteration) derive from :class:`NumericalError`.  The CLI
maps the two families to distinct exit codes.
"""


class ProjPlaneError(Exception):
    """Base class for all errors raised by the package."""


class ValidationError(ProjPlaneError, ValueError):
    pass


class NumericalError(ProjPlaneError, ArithmeticError):
    pass


# triality-core
class NotSquare(ValidationError):
    pass


class BadDimension(ValidationError):
    pass


class SingularMatrix(NumericalError):
    pass


class Degenerate(NumericalError):
    pass


# projective-core
class EqualArguments(ValidationError):
    pass


class OnAxisAtInfinity(ValidationError):
    pass


# chart-lab
class ChartSyntaxError(ValidationError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class IndexOutOfRange(ValidationError):
    pass


class DomainError(NumericalError):
    pass


class SingularJacobian(NumericalError):
    pass


class NoConvergence(NumericalError):
    def __init__(self, message, best=None, residual=None):
        self.best = best
        self.residual = residual
        super().__init__(message)


# gw-grassmann
class DependentVectors(ValidationError):
    pass


class TooFewSamples(ValidationError):
    pass


class NotContracting(ValidationError):
    def __init__(self, message, L=None):
        self.L = L
        super().__init__(message)


# radon
class QuadratureDiverged(NumericalError):
    pass


class DegenerateSurface(ValidationError):
    pass


class NonTransverseExcess(NumericalError):
    pass


# poncelet
class DegenerateConic(NumericalError):
    def __init__(self, message, lines=None):
        self.lines = lines
        super().__init__(message)


class ColinearTriple(ValidationError):
    pass


class RankDeficient(ValidationError):
    pass


class NotOnConic(ValidationError):
    pass


class InsideConic(ValidationError):
    pass


class InvalidState(ValidationError):
    pass


class TangentPair(ValidationError):
    pass


class DriftExceeded(NumericalError):
    pass


class NotNested(ValidationError):
    pass


class IdenticalConics(ValidationError):
    pass


# cli
class UnplottableResult(ValidationError):
    pass
