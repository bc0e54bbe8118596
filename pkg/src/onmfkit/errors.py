"""Exception and warning types shared across the package."""


class OnmfError(Exception):
    """Base class for all errors raised by onmfkit."""


class ZeroMatrix(OnmfError):
    """The input matrix has zero Frobenius norm."""


class NoConvergence(OnmfError):
    """An iterative kernel hit its iteration cap."""


class RankDeficient(OnmfError):
    """The Stiefel projection is not unique (rank-deficient input)."""


class Infeasible(OnmfError):
    """The problem cannot be set up, e.g. fewer points than clusters."""


class ParseError(OnmfError):
    """A data file does not follow the expected grammar."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class DimensionMismatch(OnmfError):
    pass


class NegativeValue(OnmfError):
    pass


class GeometryError(OnmfError):
    """Swimmer parameters that do not fit the frame or overlap."""


class ConfigError(OnmfError):
    pass


class OnmfWarning(UserWarning):
    """Non-fatal numerical flags (degenerate clusters, stalls, ...)."""
