"""Exception hierarchy shared by the simulation pipeline."""


class NomaError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(NomaError, ValueError):
    """Invalid physical or algorithmic parameter."""


class DegenerateChannelError(NomaError, ValueError):
    """A channel vector has zero norm."""


class PairingInfeasibleError(NomaError):
    """Fewer than the requested number of clusters could be formed."""


class PrecoderSingularError(NomaError):
    """The strong-user Gram matrix is rank deficient or ill-conditioned."""


class OrderingError(NomaError):
    """Strong/weak ordering still fails after the relabel pass."""


class InfeasibleError(NomaError):
    """QoS and power constraints cannot be met simultaneously."""

    def __init__(self, message, cluster=None):
        super().__init__(message)
        self.cluster = cluster


class ConvergenceError(NomaError):
    """An iterative method hit its iteration cap."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []
