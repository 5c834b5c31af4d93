"""Exception types shared across the toolkit."""


class MorphgenError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(MorphgenError, ValueError):
    """Input violates a documented precondition or invariant."""


class FormatError(MorphgenError, ValueError):
    """A file could not be parsed.

    ``offset`` is the byte offset at which parsing failed, when known.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NoInterfaceError(MorphgenError):
    """A scalar field has no zero crossing / empty band to reconstruct from."""


class EmptyProjectionError(MorphgenError):
    """No orthographic ray hit the mesh."""


class ConditioningError(MorphgenError, ArithmeticError):
    """Kernel matrix could not be factorized even after jitter escalation."""


class IntegrityError(MorphgenError):
    """Dataset files are missing or do not match their recorded checksums."""

    def __init__(self, message, files=()):
        super().__init__(message)
        self.files = list(files)
