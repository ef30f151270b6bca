"""Exception hierarchy shared by all modules."""


class ExcitonSlabError(Exception):
    """Base class for every error raised by the package."""


class InvalidParameterError(ExcitonSlabError, ValueError):
    pass


class SingularFrequencyError(ExcitonSlabError, ValueError):
    pass


class UnsupportedError(ExcitonSlabError, NotImplementedError):
    pass


class UnphysicalStateError(ExcitonSlabError, ValueError):
    pass


class CertificationError(ExcitonSlabError, RuntimeError):
    pass


class BoundaryZeroError(CertificationError):
    """A zero of the determinant sits on (or numerically at) a contour edge."""


class DegenerateTransformError(ExcitonSlabError, ArithmeticError):
    pass


class ConfigError(ExcitonSlabError, ValueError):
    pass


class ResolutionError(ExcitonSlabError, RuntimeError):
    pass
