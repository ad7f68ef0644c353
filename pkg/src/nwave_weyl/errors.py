"""Exception and warning classes raised by the library."""


class NWaveError(Exception):
    """Base class for all library errors."""


class InvalidInput(NWaveError, ValueError):
    pass


class IntegrationFailure(NWaveError):
    pass


class BranchPointOnGrid(NWaveError):
    pass


class ContractionFailure(NWaveError):
    pass


class NotInvertible(NWaveError):
    def __init__(self, message, lam=None):
        super().__init__(message)
        self.lam = lam


class AliasingRisk(NWaveError):
    pass


class SingularOperator(NWaveError):
    pass


class ConditioningError(NWaveError):
    pass


class InvalidDarbouxData(NWaveError):
    pass


class PositivityLoss(NWaveError):
    pass


class ResolventSingularity(NWaveError):
    pass


class DomainMismatch(NWaveError):
    pass


class DiscretizationWarning(UserWarning):
    pass


class ReconstructionWarning(UserWarning):
    pass
