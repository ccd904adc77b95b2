"""Exception types raised by pshlab operations."""


class PshlabError(Exception):
    """Base class for all pshlab errors."""


class DomainError(PshlabError, ValueError):
    """Argument outside the domain of a special function or gain function."""


class PointOutsideDomain(PshlabError, ValueError):
    pass


class ConvergenceFailure(PshlabError, RuntimeError):
    pass


class NoCoveringPatch(PshlabError):
    pass


class CoverDegenerate(PshlabError):
    pass


class RegionViolation(PshlabError):
    pass


class NonFinite(PshlabError):
    pass


class NuTooLarge(PshlabError, ValueError):
    pass


class TranslateEscapes(PshlabError):
    pass


class MarginViolated(PshlabError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class GammaTooSmall(PshlabError):
    pass


class OmegaRatioViolation(PshlabError):
    pass


class AttainmentViolation(PshlabError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class NonSmoothPoint(PshlabError):
    pass


class ConfigError(PshlabError, ValueError):
    pass
