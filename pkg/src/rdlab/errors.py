"""Exception types shared across the package."""


class RdlabError(Exception):
    """Base class for all rdlab errors."""


class CalibrationError(RdlabError):
    """Raised when microdata cannot support DGP calibration."""


class FitError(RdlabError):
    """Raised on rank-deficient or otherwise unusable regression fits.

    Carries the design-matrix condition number when available.
    """

    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class BandwidthError(RdlabError):
    """Raised when bandwidth plug-ins are degenerate."""


class InsufficientData(RdlabError):
    """Raised when a local fit has too few observations in its window."""


class DomainError(RdlabError):
    """Raised on arguments outside an operation's mathematical domain."""


class StudyFull(RdlabError):
    """Raised when a study has no participant slots left."""


class SessionStateError(RdlabError):
    """Raised on out-of-order or conflicting session operations."""
