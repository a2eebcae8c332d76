"""Exception hierarchy.

Every numerical failure raised by the library derives from
:class:`LocdensError`; the CLI maps these to exit code 2 and prints the class
name together with the message.
"""


class LocdensError(Exception):
    """Base class for all numerical / contract failures."""


class UnsupportedBasis(LocdensError, ValueError):
    pass


class NonFiniteIntegrand(LocdensError):
    pass


class NotPositiveDefinite(LocdensError):
    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class SingularUpdate(LocdensError):
    pass


class EmptyWindow(LocdensError):
    pass


class MaxIterExceeded(LocdensError):
    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class DerivativeUnavailable(LocdensError):
    pass


class OscillationTooLarge(LocdensError):
    pass


class EpsilonTooLarge(LocdensError):
    pass


class WindowMassOne(LocdensError):
    pass


class ZExceedsG2Over4(LocdensError):
    pass


class Phi1TooLarge(LocdensError):
    pass


class CellSkipped(LocdensError):
    pass


class InsufficientCells(LocdensError):
    pass


class InfeasibleBandwidth(LocdensError):
    pass


class NoFeasibleBandwidth(LocdensError):
    pass
