class IntegrationDivergedError(RuntimeError):
    """A sweep produced a non-finite value."""

    def __init__(self, message: str, node: int = -1):
        super().__init__(message)
        self.node = node


class MinimizerFailedError(RuntimeError):
    """The numeric Hamiltonian minimizer exhausted its iteration budget."""

    def __init__(self, message: str, t: float = float("nan")):
        super().__init__(message)
        self.t = t


class UnknownProblemError(KeyError):
    pass
