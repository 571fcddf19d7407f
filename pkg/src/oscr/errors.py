"""Exception types shared across the toolkit."""


class OscrError(Exception):
    """Base class for toolkit errors."""


class InputError(OscrError):
    """Bad user input: malformed files, schema violations, invalid values."""


class DegeneratePose(OscrError):
    """Camera up vector is parallel to the viewing direction."""


class OffscreenBox(OscrError):
    """Requested box has no projected pixels in the frame."""


class DimensionMismatch(InputError):
    """Image dimensions are incompatible with the token patch size."""


class SpanOverlap(InputError):
    """Noun token spans intersect."""


class MissingMask(InputError):
    """Box set and token mask set do not line up."""


class NoAppearanceTokens(InputError):
    """Personalization requested on a token layout without appearance tokens."""


class NoPairs(OscrError):
    """No scene yields an evaluable object pair."""


class EmptyManifest(InputError):
    """Manifest contains no scenes."""


class BudgetExhausted(OscrError):
    """Rejection-sampling budget ran out before enough scenes were accepted."""

    def __init__(self, message, partial_manifest=None):
        super().__init__(message)
        self.partial_manifest = partial_manifest
