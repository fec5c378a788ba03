"""Error taxonomy shared by all modules.

Every failure mode raised on purpose derives from FdevalError so the CLI can
map library errors to exit code 1 while genuine bugs still surface as
ordinary tracebacks.
"""


class FdevalError(Exception):
    pass


class MissingFile(FdevalError):
    pass


class ShapeMismatch(FdevalError):
    pass


class NonFiniteValue(FdevalError):
    pass


class LabelOutOfRange(FdevalError):
    pass


class EmptyNewClassStudy(FdevalError):
    pass


class MissingMcdStack(FdevalError):
    pass


class MissingFeatures(FdevalError):
    pass


class UnknownExternal(FdevalError):
    pass


class SingularCovariance(FdevalError):
    pass


class ClassUnderpopulated(FdevalError):
    pass


class EmptyEvaluationSet(FdevalError):
    pass


class DegenerateLabels(FdevalError):
    pass


class NoFeasibleThreshold(FdevalError):
    pass


class PerfectSeparation(FdevalError):
    pass


class InvalidParameter(FdevalError):
    pass
