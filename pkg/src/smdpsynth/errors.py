"""Exception types shared across the package."""


class SmdpsynthError(Exception):
    """Base class for all package-specific errors."""


class LtlSyntaxError(SmdpsynthError):
    """Malformed temporal formula. Carries the byte offset of the failure."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class UnknownToken(LtlSyntaxError):
    """Illegal character in a temporal formula."""


class CapacityExceeded(SmdpsynthError):
    """A construction grew past its configured state budget."""


class EmptyCycle(SmdpsynthError):
    """Lasso word with an empty cycle part."""


class UnknownState(SmdpsynthError):
    """State id outside the model."""


class ActionNotEnabled(SmdpsynthError):
    """Action queried at a state where it is not enabled."""


class ConfigError(SmdpsynthError):
    """Invalid scenario or experiment configuration."""


class AlphabetMismatch(SmdpsynthError):
    """Model and automaton disagree on the atomic propositions."""


class UntrackedPair(SmdpsynthError):
    """No posterior for the queried state-action pair."""


class UntrackedTriple(SmdpsynthError):
    """No posterior for the queried state-action-successor triple."""


class MomentUndefined(SmdpsynthError):
    """Requested moment does not exist for a heavy-tailed predictive."""


class EmptyWinningCandidate(SmdpsynthError):
    """Initial winning candidate set is empty; nothing to learn."""


class NoAllowedAction(SmdpsynthError):
    """State has no allowed action in the current winning pair set."""


class NonfiniteRisk(SmdpsynthError):
    """A risk value came out non-finite."""


class PolicyLeavesW(SmdpsynthError):
    """Policy evaluation found a transition leaving the safe region."""


class DomainGap(SmdpsynthError):
    """Combined policy leaves some state without an action."""
