from sentfeat.errors import (
    FeatureDimensionError,
    LockFileError,
    ModelLoadError,
    NonFiniteFeatures,
    SentfeatError,
    StimuliError,
    TokenizationError,
    TruncationWarning,
    UsageError,
)
from sentfeat.extract import (
    EXPECTED_DIM,
    POOLING_MODES,
    ExtractionJob,
    extract,
    extract_all,
    load_checkpoint,
    load_lock,
    read_stimuli,
)

__version__ = "0.1.0"
