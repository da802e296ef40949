"""Exception hierarchy shared by every module."""


class VirtisoError(Exception):
    """Base class for all library errors."""


class ZeroAnchor(VirtisoError):
    pass


class NonUnitPhase(VirtisoError):
    pass


class NonUnitInput(VirtisoError):
    pass


class DimMismatch(VirtisoError):
    pass


class DegenerateCoefficient(VirtisoError):
    pass


class ModeError(VirtisoError):
    pass


class PoleEvaluation(VirtisoError):
    pass


class BracketFailure(VirtisoError):
    pass


class NonConvergence(VirtisoError):
    pass


class IllConditioned(VirtisoError):
    pass


class IndexUnresolvable(VirtisoError):
    pass


class TruncationTooCoarse(VirtisoError):
    pass


class QuadratureTooCoarse(VirtisoError):
    pass


class DegenerateInterval(VirtisoError):
    pass


class InsufficientSamples(VirtisoError):
    pass


class WindowViolation(VirtisoError):
    pass


class ConfigError(VirtisoError):
    """Invalid run configuration; the CLI maps it to exit code 2."""
