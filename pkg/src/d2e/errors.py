"""Exception types shared across the package.

Numeric failures carry enough context (shapes, offending values) to diagnose
a bad run from the message alone; callers are expected to let them propagate
unless the operation documents a retry path.
"""


class D2EError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(D2EError):
    """Operand shapes do not conform."""


class NotPositiveDefinite(D2EError):
    """Cholesky failed even after jitter escalation."""


class SingularTriangular(D2EError):
    """Triangular solve hit a zero diagonal entry."""


class OutOfRange(D2EError):
    """An input lies outside its documented open/closed interval."""


class ParameterOutOfRange(D2EError):
    """A distribution parameter violates positivity or range constraints."""


class DegenerateDensity(D2EError):
    """All component log-densities underflowed even after stabilization."""


class DisconnectedParameter(D2EError):
    """A registered parameter does not influence the requested loss."""


class InsufficientHistory(D2EError):
    """A lagged window was requested before enough history exists."""


class EmptyBuffer(D2EError):
    """Replay buffer holds no episodes."""


class NoEligibleEpisode(D2EError):
    """No stored episode is long enough for the requested chunk length."""


class VersionMismatch(D2EError):
    """Checkpoint format version is not supported."""


class CorruptCheckpoint(D2EError):
    """Checkpoint failed checksum, magic, or structural validation."""


class UnknownKey(D2EError):
    """Config key is not recognized."""


class TypeMismatch(D2EError):
    """Config value cannot be coerced to the declared type."""


class MissingRequired(D2EError):
    """A required config key is absent."""
