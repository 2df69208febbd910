"""Exception hierarchy shared by every triage module."""


class TriageError(Exception):
    """Base class for all triage errors."""


class ConfigurationError(TriageError):
    """Invalid configuration: weights, thresholds, dialects, cost params."""


class DomainError(TriageError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class AnalysisError(TriageError):
    """Source text could not be analyzed (binary or undecodable input)."""


class LockError(TriageError):
    """Another writer holds the feature store lock."""


class IntegrityError(TriageError):
    """A persisted file is corrupted."""


class RoutingError(TriageError):
    """A task cannot be routed (missing features or outcomes)."""


class TrainingError(TriageError):
    """The tier classifier cannot be trained on the given data."""


class IngestionError(TriageError):
    """A corpus file violates the documented schema."""


class SimulationError(TriageError):
    """Cost simulation was requested on data lacking outcomes."""


class StatsError(TriageError, ValueError):
    """Statistical routine received unusable samples."""
