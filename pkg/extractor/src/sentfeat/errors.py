"""Error and warning types for the extraction pipeline.

UsageError covers caller mistakes (bad flags, empty model lists); the
others are data or model problems. The CLI maps UsageError to exit 1 and
everything else to exit 2.
"""


class SentfeatError(Exception):
    """Base class for all extraction errors."""


class UsageError(SentfeatError):
    pass


class StimuliError(SentfeatError):
    """Stimuli file missing, unreadable, empty, or containing blank lines."""


class ModelLoadError(SentfeatError):
    """Checkpoint or tokenizer could not be resolved and loaded."""


class TokenizationError(SentfeatError):
    pass


class FeatureDimensionError(SentfeatError):
    """Checkpoint hidden size differs from the 768-d feature contract."""


class NonFiniteFeatures(SentfeatError):
    """Inference produced NaN or infinite activations."""


class LockFileError(SentfeatError):
    """Model lock file missing or malformed."""


class TruncationWarning(UserWarning):
    """A stimulus exceeded the token budget and was truncated."""
