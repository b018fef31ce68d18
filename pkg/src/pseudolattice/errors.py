"""Exception hierarchy shared by every stage of the pipeline."""


class PseudoLatticeError(Exception):
    """Base class; carries an optional ``context`` dict for diagnostics."""

    def __init__(self, message: str = "", **context):
        super().__init__(message)
        self.context = context


# models
class SingularMatrix(PseudoLatticeError, ValueError):
    pass


class OutsideRegularRegion(PseudoLatticeError, ValueError):
    pass


class NoOverlap(PseudoLatticeError):
    pass


class NonIntegerTransition(PseudoLatticeError):
    pass


class NonUnimodular(PseudoLatticeError):
    pass


class OpenLoop(PseudoLatticeError, ValueError):
    pass


# diophantine
class InvalidParameter(PseudoLatticeError, ValueError):
    pass


class EmptySegment(PseudoLatticeError, ValueError):
    pass


class LambdaTooLarge(PseudoLatticeError, ValueError):
    pass


# spectrum
class RegimeViolation(PseudoLatticeError, ValueError):
    pass


# charts
class InsufficientPoints(PseudoLatticeError):
    pass


class DegenerateBasis(PseudoLatticeError):
    pass


class NoConvergence(PseudoLatticeError):
    pass


class AlignmentAmbiguity(PseudoLatticeError):
    pass


class ChainBroken(PseudoLatticeError):
    pass


class OutsideDomain(PseudoLatticeError, ValueError):
    pass


class DegenerateLeadingTerm(PseudoLatticeError):
    pass


# monodromy
class InconsistentSamples(PseudoLatticeError):
    pass


class CocycleViolation(PseudoLatticeError):
    pass


class NotALoop(PseudoLatticeError, ValueError):
    pass


class MissingEdge(PseudoLatticeError):
    pass
