"""Exception types shared across the package."""


class BZError(Exception):
    """Base class for every error raised by bzstreets."""


class ContractViolation(BZError, ValueError):
    """An argument broke an operation's precondition (shape, mask, range)."""


class DomainError(BZError, ValueError):
    """A numeric argument lies outside the operation's domain."""


class InvalidPerturbation(ContractViolation):
    pass


class InvalidSpecError(ContractViolation):
    pass


class InsufficientDataError(ContractViolation):
    pass


class SingularFitError(ContractViolation):
    pass


class DegenerateSampleError(ContractViolation):
    pass


class MaskFormatError(BZError):
    """An image could not be read as a street mask."""


class InputFormatError(BZError):
    """A data file is malformed; carries the file path and byte/line offset."""

    def __init__(self, path, offset, message):
        self.path = str(path)
        self.offset = offset
        super().__init__(f"{self.path}: offset {offset}: {message}")


class ConfigError(BZError):
    pass


class DivergenceError(BZError, FloatingPointError):
    """A non-finite value appeared in the medium."""

    def __init__(self, step_index, node, message=None):
        self.step_index = step_index
        self.node = node
        super().__init__(
            message or f"non-finite value at node {node} on step {step_index}"
        )


class ObserverError(BZError):
    """An observer failed; the run was aborted."""
