"""Exception types raised across the package."""


class MixspecError(Exception):
    """Base class for all package errors."""


class InvalidSpecError(MixspecError, ValueError):
    """A window, model or experiment description is malformed."""


class InsufficientDataError(MixspecError, IndexError):
    """The record is too short for the requested segments.

    Attributes
    ----------
    required : int
        Number of samples needed.
    available : int
        Number of samples present.
    """

    def __init__(self, required, available, what="samples"):
        self.required = int(required)
        self.available = int(available)
        super().__init__(
            f"need {self.required} {what} (last index {self.required - 1}), "
            f"only {self.available} available"
        )


class DomainError(MixspecError, ValueError):
    """An argument lies outside the range where a bound is asserted."""


class ProfileRangeError(MixspecError, ValueError):
    """A tabulated mixing profile was queried outside its grid."""


class NotUniformlyErgodicError(MixspecError, ValueError):
    """The chain has no positive one-step Doeblin coefficient."""


class NonSummableError(MixspecError, ValueError):
    """A lag series did not converge within the iteration budget."""


class DataFileError(MixspecError, ValueError):
    """A data file could not be parsed as numeric samples."""
