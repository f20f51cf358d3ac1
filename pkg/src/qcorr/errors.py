"""Exception hierarchy shared by all qcorr modules."""


class QCorrError(Exception):
    """Base class for every error raised by qcorr."""


class DimensionMismatch(QCorrError, ValueError):
    pass


class NotNormalized(QCorrError, ValueError):
    pass


class NullProjection(QCorrError, ValueError):
    """The (anti)symmetrized vector vanishes: no support in that exchange sector."""


class TooManyParticles(QCorrError, ValueError):
    pass


class EmptyClassicalSet(QCorrError, ValueError):
    """Fermionic classical family is empty because d < N."""


class NonpositiveBound(QCorrError, ValueError):
    pass


class SymmetryViolation(QCorrError, ValueError):
    """An input claimed to live in an exchange sector but does not."""


class CommutatorViolation(QCorrError, ValueError):
    pass


class SolverFailure(QCorrError, RuntimeError):
    pass
