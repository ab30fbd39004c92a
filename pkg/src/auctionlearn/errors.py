"""Exception types shared across the toolkit."""


class AuctionLearnError(ValueError):
    """Base class for contract violations raised by this package."""


class InvalidDistribution(AuctionLearnError):
    """A distribution spec is malformed (bad probabilities, support out of range, ...)."""


class DimensionMismatch(AuctionLearnError):
    """Hypothesis, profile, or sample dimensions disagree."""


class SampleFileError(AuctionLearnError):
    """A sample file is missing, malformed, or inconsistent with its declaration."""


class AnalyticUnsupported(AuctionLearnError):
    """Closed-form evaluation was requested for an unsupported (class, distribution) pair."""


class CeilingExceeded(AuctionLearnError):
    """An enumeration would exceed the configured candidate or subset ceiling."""
