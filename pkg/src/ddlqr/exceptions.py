"""Exception types shared across the library."""


class DdlqrError(Exception):
    """Base class for all library-specific errors."""


class NotStabilizing(DdlqrError):
    """A gain that was required to be stabilizing is not (closed loop not Schur stable)."""


class NotStabilizable(DdlqrError):
    """A system pair (A, B) fails the stabilizability rank test."""


class SingularOperator(DdlqrError):
    """The Kronecker-lifted evaluation operator is numerically singular."""


class InsufficientTrace(DdlqrError):
    """A trace is too short (or too converged) to estimate a contraction factor."""


class Underdetermined(DdlqrError):
    """A data regression does not pin down its unknowns (too few samples or
    ill-conditioned Gram matrix)."""

    def __init__(self, message, episode=None, stage=None):
        super().__init__(message)
        self.episode = episode
        self.stage = stage


class EvaluationInfeasible(DdlqrError):
    """Certainty-equivalent policy evaluation has no PSD solution because the
    estimated closed loop is not Schur stable."""


class ConvergenceError(DdlqrError):
    """An iterative solver exhausted its iteration budget."""


class ConfigError(DdlqrError):
    """An experiment configuration failed schema validation."""
