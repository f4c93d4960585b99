# pycmc/exceptions.py

class CmcError(Exception):
    """Base exception for pycmc operations."""
    pass

class ValidationError(CmcError):
    """Raised when a model, prior, task or tensor violates its invariants."""
    pass

class NonStochasticRowError(ValidationError):
    """Raised when a transition row does not sum to 1."""

    def __init__(self, u, i, row_sum):
        self.u = u
        self.i = i
        self.row_sum = row_sum
        super().__init__(f"转移行 (u={u}, i={i}) 之和为 {row_sum!r}，不等于 1")

class NegativeProbabilityError(ValidationError):
    """Raised when a transition probability lies outside [0, 1]."""

    def __init__(self, u, i, j, value=None):
        self.u = u
        self.i = i
        self.j = j
        self.value = value
        super().__init__(f"转移概率 (u={u}, i={i}, j={j}) 不在 [0, 1] 内: {value!r}")

class InvalidProbabilityError(ValidationError):
    """Raised when a builder parameter is not a probability."""
    pass

class InvalidStateCountError(ValidationError):
    """Raised when a builder receives too few states."""
    pass

class InvalidPriorError(ValidationError):
    """Raised when the Dirichlet pseudo-count is not positive."""
    pass

class InvalidDiscountError(ValidationError):
    """Raised when a discount factor is outside [0, 1)."""
    pass

class ShapeMismatchError(ValidationError):
    """Raised when two tensors describe different state/control spaces."""
    pass

class LengthMismatchError(ValidationError):
    """Raised when two probability vectors have different lengths."""
    pass

class IndexOutOfRangeError(CmcError, IndexError):
    """Raised when a state or control index is out of range."""
    pass

class UnsupportedSupportError(CmcError):
    """Raised when KL(p||q) is infinite because q_j = 0 where p_j > 0."""
    pass

class HorizonExceededError(CmcError):
    """Raised when a planner is asked to act at or beyond the horizon."""
    pass

class IntractableHorizonError(CmcError):
    """Raised when the exact DP tree would be too large to expand."""
    pass

class SingularSystemError(CmcError):
    """Raised when the policy evaluation system cannot be solved."""
    pass

class ParseError(CmcError):
    """Raised when a JSON document cannot be parsed into a model."""

    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{location}: {message}"
        super().__init__(message)

class ConfigError(CmcError):
    """Raised when an experiment configuration is invalid."""
    pass

class UnsupportedCompressionError(CmcError):
    """Raised when an unsupported compression algorithm is requested."""
    pass

class ArtifactReadError(CmcError):
    """Raised when an error occurs while reading an artifact file."""
    pass

class ArtifactWriteError(CmcError):
    """Raised when an error occurs while writing an artifact file."""
    pass

class UsageError(CmcError):
    """Raised when the command line cannot be parsed."""
    pass
