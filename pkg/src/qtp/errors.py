"""Exception hierarchy shared by every qtp module."""


class QtpError(Exception):
    """Base class for all errors raised by qtp."""


class InvalidAngleError(QtpError, ValueError):
    """An angle was NaN or infinite."""


class PhaseRangeError(QtpError, IndexError):
    """A phase index does not belong to its phase set."""


class DegeneratePhaseSetError(QtpError, ValueError):
    """K < 2: the angle set cannot hide anything."""


class EmptyMessageError(QtpError, ValueError):
    """A sample or message of length zero was requested."""


class ProtocolOrderError(QtpError):
    """A photon arrived at a party out of (position, pass) order."""


class MissingSecretError(QtpError):
    """The authenticated variant was used without pre-shared angles."""


class SessionAbort(QtpError):
    """A session stopped before completing all positions."""

    def __init__(self, message: str, position: int = 0, reason: int | None = None):
        super().__init__(message)
        self.position = position
        self.reason = reason


class ConfigError(QtpError, ValueError):
    """A session configuration violates one of its invariants."""


class OracleUnsupportedError(QtpError, ValueError):
    """The exact oracle cannot enumerate the requested scenario."""
