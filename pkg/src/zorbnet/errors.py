"""Exception hierarchy shared by every zorbnet module."""


class ZorbError(Exception):
    """Base class for all library errors."""


class ContractViolation(ZorbError, ValueError):
    """Raised when an operation receives arguments that break its contract
    (non-conforming shapes, bad geometry, invalid config values)."""


class NumericalError(ZorbError, ArithmeticError):
    """An iterative numerical routine failed (SVD non-convergence, NaN blow-up)."""


class ActivationStateError(ZorbError, RuntimeError):
    """An activation was asked to do something its stored state does not allow."""


class ModelFormatError(ZorbError):
    """A serialized model could not be decoded."""

    def __init__(self, message, layer_index=None):
        self.layer_index = layer_index
        if layer_index is not None:
            message = f"layer {layer_index}: {message}"
        super().__init__(message)


class DataFormatError(ZorbError):
    """A dataset file is malformed."""

    def __init__(self, message, offset=None, path=None):
        self.offset = offset
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if offset is not None:
            where.append(f"byte offset {offset}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ArchParseError(ZorbError, ValueError):
    """An architecture string could not be parsed."""

    def __init__(self, message, position=None, token=None):
        self.position = position
        self.token = token
        if position is not None:
            message = f"{message} at token {position} ({token!r})"
        super().__init__(message)
