"""Exception hierarchy shared by every module."""
import numpy as np


class IqboError(Exception):
    """Base class for all library errors."""


class ConfigError(IqboError):
    """Experiment configuration failed validation."""


class DimensionMismatchError(IqboError, ValueError):
    """Inputs disagree on dimensionality or length."""


class NonFiniteInputError(IqboError, ValueError):
    """Inputs contain NaN or infinite coordinates."""


class DomainError(IqboError, ValueError):
    """Input lies outside the environment's domain."""


class FactorizationError(IqboError, np.linalg.LinAlgError):
    """Cholesky factorization failed after the full jitter schedule."""


class NotPositiveSemidefiniteError(IqboError, ValueError):
    """A covariance matrix has a clearly negative eigenvalue."""


class CandidateSetExhausted(IqboError):
    """The tree search has no candidate left to query."""
