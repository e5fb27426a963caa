"""Exceptions raised by the pipeline stages."""


class LeafExtractError(Exception):
    """Base class for pipeline failures."""


class NoLeafCandidateError(LeafExtractError):
    """No green region survives to seed the leaf marker."""


class MarkerVanishedError(LeafExtractError):
    """The final marker erosion removed every pixel.

    ``fallback`` holds the un-eroded component the caller may use instead.
    """

    def __init__(self, message, fallback=None):
        super().__init__(message)
        self.fallback = fallback


class NoVeinFoundError(LeafExtractError):
    """No line inside the leaf reached the vote threshold."""
