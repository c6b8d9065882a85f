"""Exception types shared across the package."""


class ListboostError(Exception):
    """Base class for all package-specific failures."""


class InvalidWeight(ListboostError):
    """A weight vector contains a negative, NaN, or infinite entry."""


class AllZeroWeights(ListboostError):
    """A weight vector sums to zero and cannot be normalized."""


class InvalidGamma(ListboostError):
    """An edge parameter is outside its valid open interval."""


class InvalidParams(ListboostError):
    """A parameter combination violates an operation's precondition."""


class EmptyClass(ListboostError):
    """A finite hypothesis class has no members."""


class UnknownInstance(ListboostError):
    """An instance key is outside the universe a predictor was built for."""


class NonNumericInstance(ListboostError):
    """A learner requiring numeric feature vectors got something else."""


class EmptyCandidates(ListboostError):
    """A candidate label set for elimination is empty."""


class ListLookupError(ListboostError):
    """A list function has no value for the requested instance."""


class InsufficientData(ListboostError):
    """Not enough examples to carve out the requested splits."""


class BoostFailure(ListboostError):
    """Base class for pipeline-level failures that an adaptive driver may retry."""


class PhaseFailure(BoostFailure):
    """A training pair lost its true label during a list-shrinking phase.

    Phase 0 means the initial hint never covered the pair at all.
    """

    def __init__(self, phase: int, lost: int = 0, message: str = ""):
        self.phase = phase
        self.lost = lost
        super().__init__(
            message or f"phase {phase}: {lost} training pair(s) lost their true label"
        )


class GammaExhausted(BoostFailure):
    """Adaptive edge halving went below the configured floor without success."""


class RTooLarge(ListboostError):
    """A compression record is at least as large as the sample it explains."""


class NonDeterministicLearner(ListboostError):
    """Replaying a recorded training call produced a different hypothesis."""


class NotRealizable(ListboostError):
    """No class member is consistent with the supplied labeled examples."""


class BudgetExceeded(ListboostError):
    """An exhaustive search would overrun its enumeration budget."""


class SearchExhausted(ListboostError):
    """A budgeted search ended without any candidate meeting its target."""


class GameNotConverged(ListboostError):
    """The weight game ended without producing a consistent list function."""
