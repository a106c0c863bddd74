"""Exception hierarchy shared by all modules."""


class AtlasError(Exception):
    """Base class for every error raised by the package."""


class QuadratureError(AtlasError):
    pass


class ToleranceNotMet(QuadratureError):
    def __init__(self, msg, value=None, error=None):
        super().__init__(msg)
        self.value = value
        self.error = error


class NonFiniteIntegrand(QuadratureError):
    pass


class DivergenceDetected(QuadratureError):
    pass


class DegenerateGeometry(AtlasError):
    pass


class RootNotConverged(AtlasError):
    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


class EvaluationOnCut(AtlasError):
    pass


class EvaluationAtPole(AtlasError):
    pass


class UnsupportedMu(AtlasError):
    pass


class ContinuationLost(AtlasError):
    def __init__(self, msg, trajectory=None):
        super().__init__(msg)
        self.trajectory = trajectory


class BranchRegionError(AtlasError):
    pass


class SingularDenominator(AtlasError):
    pass


class ConfigError(AtlasError):
    pass


class GramNotPSD(AtlasError):
    pass


class DegenerateFrame(AtlasError):
    pass


class TruncationInsufficient(AtlasError):
    pass


class IllConditioned(AtlasError):
    pass
