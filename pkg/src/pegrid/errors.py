"""Exception types raised across the package."""


class PegridError(Exception):
    """Base class for all package-specific errors."""


class MalformedMapError(PegridError):
    """Map document is ragged, empty, too small, or uses unknown glyphs."""


class DisconnectedMapError(PegridError):
    """Accessible cells of a map are not 4-connected (or absent)."""


class InvalidActionError(PegridError):
    """A joint action contains an illegal move; carries the offending role."""

    def __init__(self, role, action, message=""):
        self.role = role
        self.action = action
        super().__init__(message or f"invalid action {action} for {role}")


class EpisodeFinishedError(PegridError):
    """step() called on a state whose status is no longer Running."""


class NonContiguousTimestepError(PegridError):
    """Observations appended to a team history out of order."""


class EmptyHistoryError(PegridError):
    """Feature summary requested for an empty history."""


class NoPathToGoalError(PegridError):
    """A* found no route; indicates a bug since maps are connected."""


class NoImprovementError(PegridError):
    """Training failed its improvement contract.

    Carries the (unimproved) policy or policies plus evaluation statistics
    so callers can inspect what happened.
    """

    def __init__(self, message, policies=None, stats=None):
        super().__init__(message)
        self.policies = policies
        self.stats = stats


class DegenerateDatasetError(PegridError):
    """Classifier dataset contains fewer than two classes."""


class SchemaMismatchError(PegridError):
    """Persisted artifact was produced under a different feature schema."""


class VersionMismatchError(PegridError):
    """Serialized document carries an unsupported format version."""


class CorruptRecordError(PegridError):
    """A serialized log record failed to parse; carries its line number."""

    def __init__(self, line_number, message=""):
        self.line_number = line_number
        super().__init__(message or f"corrupt record at line {line_number}")


class HashMismatchError(PegridError):
    """Artifact integrity hash does not match its companion file."""


class EmptyLogSetError(PegridError):
    """Metrics requested over an empty collection of episode logs."""
