"""Exception types raised across the package."""


class LorentzError(Exception):
    """Base class for all package errors."""


class NonCausalSegment(LorentzError):
    pass


class ConditionViolated(LorentzError):
    pass


class NonPositiveConformalFactor(LorentzError):
    pass


class SingularMetric(LorentzError):
    pass


class StepUnderflow(LorentzError):
    pass


class EmptyStencil(LorentzError):
    pass


class ZeroLengthPath(LorentzError):
    pass


class OutsideCone(LorentzError):
    pass


class NotInDualCone(LorentzError):
    pass


class EmptyPath(LorentzError):
    pass


class NonCausalCell(LorentzError):
    pass


class NotConstructible(LorentzError):
    pass


class NotCrossingConfiguration(LorentzError):
    pass


class MissingReport(LorentzError):
    pass


class ConfigError(LorentzError):
    """Invalid experiment configuration; `key` names the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class StalledRefinement(UserWarning):
    """Maximizer polishing made less than the minimum progress in a sweep."""
