"""Custom exceptions for treepin."""


class TreePinError(Exception):
    """Base exception for treepin errors."""
    pass


class ConfigurationError(TreePinError):
    """Raised when there's a configuration error."""
    pass


class CacheError(TreePinError):
    """Raised when the critical-point cache cannot be initialized."""
    pass


class CheckFailedError(TreePinError):
    """Raised when an oracle or consistency check fails."""
    pass


class NonpositiveDenominatorError(TreePinError):
    """Raised when λ(2β)−2λ(β)−log d ≤ 0 where it must be positive."""
    pass


class RootFindingError(TreePinError):
    """Raised when the critical inverse temperature cannot be bracketed."""
    pass


class DomainError(TreePinError):
    """Base class for inputs outside an operation's mathematical domain."""
    pass


class DegenerateDisorderError(DomainError):
    """Raised when an operation needs non-degenerate disorder."""
    pass


class BetaZeroError(DomainError):
    """Raised when a formula divides by β and β = 0."""
    pass


class OutOfDomainError(DomainError):
    """Raised when β (or t) lies outside the formula's domain."""
    pass


class DegenerateDefectArityError(DomainError):
    """Raised when d1 = 1 makes the requested quantity degenerate."""
    pass


class IndexOutOfRangeError(DomainError):
    """Raised for exit generations or node indices outside their range."""
    pass


class DepthTooLargeError(DomainError):
    """Raised when a tree traversal would exceed the node budget."""
    pass


class WrongModelKindError(DomainError):
    """Raised when an operation does not apply to the model's defect kind."""
    pass


class SupportTooLargeError(DomainError):
    """Raised when exact enumeration would visit too many disorder assignments."""
    pass


class ContinuousDisorderError(DomainError):
    """Raised when exact enumeration is requested for continuous disorder."""
    pass


class InvalidParameterError(DomainError):
    """Raised for invalid numeric parameters (replica counts, grids, ...)."""
    pass
