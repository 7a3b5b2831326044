"""Partially invertible elements of a finite-dimensional W*-algebra as a Lie groupoid."""
from .algebra import (
    AlgebraDescriptor,
    AlgebraElement,
    ProjectionElement,
    as_projection,
    pairing,
    partial_inverse,
    polar_decompose,
)
from .errors import (
    BaseMismatch,
    ConditionWarning,
    ConfigError,
    CornerError,
    DegeneratePairing,
    DescriptorError,
    GroupoidError,
    InvarianceViolation,
    LogBranchError,
    NonComposable,
    NotInChart,
    RankError,
    SamplingError,
    UnknownCheck,
    UnknownGenerator,
)
from .groupoid import GroupoidElement, compose, identity_at, inverse

__version__ = "0.1.0"

__all__ = [
    "AlgebraDescriptor",
    "AlgebraElement",
    "BaseMismatch",
    "ConditionWarning",
    "ConfigError",
    "CornerError",
    "DegeneratePairing",
    "DescriptorError",
    "GroupoidElement",
    "GroupoidError",
    "InvarianceViolation",
    "LogBranchError",
    "NonComposable",
    "NotInChart",
    "ProjectionElement",
    "RankError",
    "SamplingError",
    "UnknownCheck",
    "UnknownGenerator",
    "as_projection",
    "compose",
    "identity_at",
    "inverse",
    "pairing",
    "partial_inverse",
    "polar_decompose",
]
