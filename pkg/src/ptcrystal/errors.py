"""Exception and warning types shared across modules."""


class PtCrystalError(Exception):
    """Base class for package errors."""


class ConfigError(PtCrystalError, ValueError):
    """Invalid run configuration (unknown key, bad value, unwritable directory)."""


class NumericalError(PtCrystalError, RuntimeError):
    """A numerical procedure failed (non-convergence, overflow, wrap-around)."""


class EigensolverError(NumericalError):
    pass


class NoTransitionError(NumericalError):
    """The reality indicator is identical at both ends of a lambda bracket."""


class TruncationWarning(RuntimeWarning):
    """Plane-wave truncation reached by the dynamics."""


class AccuracyWarning(RuntimeWarning):
    """A result was computed outside the regime where it is accurate."""
