"""Exception types shared across the package."""


class ArtifactError(Exception):
    """Base class for all mathematical failures raised by the package."""


class PrecisionExhausted(ArtifactError):
    pass


class DivisionByZero(ArtifactError, ZeroDivisionError):
    pass


class RamifiedRoot(ArtifactError):
    pass


class ResourceLimit(ArtifactError):
    pass


class DepthLoss(ArtifactError):
    pass


class ParseError(ArtifactError):
    pass


class InvariantViolation(ArtifactError):
    def __init__(self, check, detail=""):
        self.check = check
        super().__init__(f"{check}: {detail}" if detail else check)


class OracleUnavailable(ArtifactError):
    pass


class OrbitIncomplete(ArtifactError):
    pass


class MissingHeckeData(ArtifactError):
    pass


class MissingAbelianizationData(ArtifactError):
    pass


class Infeasible(ArtifactError):
    pass


class NoneFound(ArtifactError):
    pass


class DegenerateForm(ArtifactError):
    pass


class SamplePoleCollision(ArtifactError):
    pass


class ExpOutOfRange(ArtifactError):
    pass


class WordProblemUnavailable(ArtifactError):
    pass
