"""Exception hierarchy shared by all ubitlab modules."""


class UbitlabError(Exception):
    """Base class for every error raised by ubitlab."""


class DimMismatch(UbitlabError, ValueError):
    pass


class NonAntisymmetric(UbitlabError, ValueError):
    pass


class EigFailure(UbitlabError, RuntimeError):
    pass


class DomainError(UbitlabError, ValueError):
    pass


class NotCommuting(UbitlabError, ValueError):
    def __init__(self, message: str, commutator_norm: float):
        super().__init__(message)
        self.commutator_norm = commutator_norm


class InvalidState(UbitlabError, ValueError):
    pass


class NotHermitian(UbitlabError, ValueError):
    pass


class NotUnitary(UbitlabError, ValueError):
    pass


class DegenerateSpectrum(UbitlabError, RuntimeError):
    pass


class BadLocalGenerator(UbitlabError, ValueError):
    pass


class NearDegenerateDenominator(UbitlabError, ArithmeticError):
    pass


class NotOrthogonal(UbitlabError, RuntimeError):
    pass


class ConfigError(UbitlabError, ValueError):
    pass
