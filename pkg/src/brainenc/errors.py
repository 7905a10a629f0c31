"""Exception hierarchy shared across the package.

Two branches matter for the CLI exit-code contract: ``UsageError``
(bad invocation or configuration, exit code 1) and ``DataError``
(malformed or inconsistent input data, exit code 2).
"""


class BrainencError(Exception):
    """Base class for every error raised by this package."""


class UsageError(BrainencError):
    """Invalid invocation, plan, or configuration."""


class DataError(BrainencError):
    """Malformed, inconsistent, or numerically unusable input data."""


class ParseError(DataError):
    """A manifest or plan document violates its schema."""


class MissingFile(DataError):
    """A referenced file does not exist."""


class FormatError(DataError):
    """A tensor file is not a valid little-endian 2-D NPY v1.0 float file."""


class NonFiniteValue(DataError):
    """A loaded tensor contains NaN or Inf."""


class ShapeMismatch(DataError):
    """Array shapes disagree with each other or with declared metadata."""


class TooFewSamples(DataError):
    """Not enough samples for the requested split or cross-validation."""


class SingularSystem(DataError):
    """Normal equations could not be solved reliably (lambda = 0 only)."""


class DomainError(DataError):
    """A numeric argument lies outside the operation's domain."""


class EmptyList(DataError):
    """An operation over a task list received no tasks."""


class UnnormalizedWeights(DataError):
    """A weight vector expected on the simplex does not sum to one."""


class ZeroNorm(DataError):
    """Cosine distance of a zero-norm vector is undefined."""


class ZeroNormRow(ZeroNorm):
    """A row used in the pairwise-cosine accuracy has zero norm."""


class ConfigError(UsageError):
    """A configuration object carries invalid values."""


class MissingAccuracyTable(UsageError):
    """Weighted averaging was requested without per-task baseline scores."""


class EmptyReports(DataError):
    """Aggregation received no evaluation reports."""


class RankDeficiencyWarning(UserWarning):
    """Requested PCA components exceed the numerical rank of the data."""


class DegenerateRowWarning(UserWarning):
    """A zero-variance row contributed a correlation of zero."""
