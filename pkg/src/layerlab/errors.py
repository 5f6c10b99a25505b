"""Exception types shared across the package."""


class LayerLabError(Exception):
    pass


class DomainError(LayerLabError, ValueError):
    """Input outside the domain of an operation."""


class MomentumError(LayerLabError, IndexError):
    """Index tuple violating a momentum condition or an excluded trivial set."""


class NumericalError(LayerLabError, RuntimeError):
    """Numerical failure: eigen-solver breakdown, overflow and similar."""


class BlowUpError(NumericalError):
    def __init__(self, message: str, last_time: float, last_state=None):
        super().__init__(f"{message} (last valid t = {last_time:.6g})")
        self.last_time = last_time
        self.last_state = last_state


class ConditioningError(NumericalError):
    """A small divisor or a near-singular system; change the parameters."""


class DivergenceError(NumericalError):
    def __init__(self, message: str, last_iterate=None, history=()):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.history = list(history)
