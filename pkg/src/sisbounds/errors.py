"""Exception types shared across modules."""


class ResourceGuardError(MemoryError):
    """Refused to build an object whose size exceeds a configured budget."""


class ConvergenceError(ArithmeticError):
    """Eigensolver stopped before meeting its tolerance; ``result`` holds the last state."""

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result
