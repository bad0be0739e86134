"""Exception hierarchy shared by all stratarx modules."""


class StratarxError(Exception):
    """Base class for all errors raised by this package."""


class MissingColumn(StratarxError):
    """A column named in the schema is absent from the CSV header."""


class BadValue(StratarxError):
    """A cell could not be parsed into the type its column requires."""


class DegenerateCohort(StratarxError):
    """The cohort is too small for the requested operation."""


class EmptyStratum(StratarxError):
    """Stratified splitting is impossible because the cohort is empty."""


class SingleClass(StratarxError):
    """Labels contain only one class where both are required."""


class TooSmall(StratarxError):
    """Too few records to train the requested model."""


class DimensionMismatch(StratarxError):
    """A covariate vector does not match the trained feature dimension."""


class OutOfRange(StratarxError):
    """A risk value lies outside [0, 1]."""


class NotAdjacent(StratarxError):
    """Bucket merge requested for non-adjacent buckets."""


class EmptyArm(StratarxError):
    """A treatment arm that must be nonempty is empty."""


class NoMatchableBucket(StratarxError):
    """Every bucket lacks one arm, so nothing can be matched."""


class RewardOutOfRange(StratarxError):
    """A reward used for policy training lies outside [0, 1]."""


class TreatedRecordPresent(StratarxError):
    """An external validation cohort contains a treated record."""


class EmptyGrid(StratarxError):
    """A weight grid with no entries was supplied."""


class InvalidConfig(StratarxError):
    """A configuration object violates its invariants."""
