"""Exception and warning types shared across the package."""


class GroupoidError(Exception):
    pass


class DescriptorError(GroupoidError, ValueError):
    """Operands live in different algebras."""


class RankError(GroupoidError, ValueError):
    pass


class NonComposable(GroupoidError, ValueError):
    """Source of the left factor differs from target of the right factor."""


class NotInChart(GroupoidError, ValueError):
    """Point lies outside the requested chart domain."""


class CornerError(GroupoidError, ValueError):
    """Element does not live in the required corner pMq."""


class BaseMismatch(GroupoidError, ValueError):
    pass


class LogBranchError(GroupoidError, ValueError):
    """Spectrum touches the branch cut of the principal logarithm."""


class DegeneratePairing(GroupoidError, ValueError):
    pass


class UnknownGenerator(GroupoidError, KeyError):
    pass


class UnknownCheck(GroupoidError, KeyError):
    pass


class SamplingError(GroupoidError, RuntimeError):
    """Admissible sample tuples could not be generated."""


class ConfigError(GroupoidError, ValueError):
    pass


class ConditionWarning(UserWarning):
    """A chart is being evaluated close to the boundary of its domain."""


class InvarianceViolation(UserWarning):
    pass
