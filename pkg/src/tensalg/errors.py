"""Exception hierarchy shared by all tensalg modules."""


class TensalgError(ValueError):
    """Base class for every error raised by tensalg."""


class RegistryError(TensalgError):
    pass


class IndexSpecError(TensalgError):
    """Malformed or inconsistent index specification.

    ``position`` is the 0-based token position the problem was found at,
    or None when the error concerns the whole index spec.
    """

    def __init__(self, message, position=None):
        if position is not None:
            message = f"token {position}: {message}"
        super().__init__(message)
        self.position = position


class ShapeMismatchError(TensalgError):
    pass


class SingularSystemError(TensalgError):
    pass


class BreakdownError(TensalgError):
    """Krylov breakdown, e.g. <P, A P> == 0 in conjugate gradients."""


class DivergenceError(TensalgError):
    """Non-finite values appeared during an iteration."""


class PlanError(TensalgError):
    pass


class FormatError(TensalgError):
    """Parse error in one of the text file formats; carries the line number."""

    def __init__(self, message, line=None, path=None):
        prefix = ""
        if path is not None:
            prefix += f"{path}:"
        if line is not None:
            prefix += f"{line}:"
        if prefix:
            message = f"{prefix} {message}"
        super().__init__(message)
        self.line = line
        self.path = path
