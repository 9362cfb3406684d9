"""Exception hierarchy shared by the solver, metrology and estimation layers."""


class DSLError(Exception):
    """Base class for every error raised by this package."""


class TruncationError(DSLError, ValueError):
    """Invalid Fock truncation (cutoff below 2, non-positive tolerance)."""


class DomainError(DSLError, ValueError):
    """Argument outside the domain where a closed form is defined."""


class NonConvergence(DSLError):
    """Steady state still has too much population at the Fock edge at the cutoff cap."""


class SingularSystem(DSLError):
    """The trace-constrained Liouvillian system could not be solved."""


class NonPhysicalState(DSLError):
    """A solved density matrix has an eigenvalue below the clipping tolerance."""


class FlatLandscape(DSLError):
    """An objective is constant (to 1e-6 relative) over the search grid."""


class FitDiverged(DSLError):
    """Nonlinear least squares hit its iteration cap."""


class RangeTooNarrow(DSLError, ValueError):
    """Bin range misses more probability mass than allowed."""


class EdgeMismatch(DSLError, ValueError):
    """Model bins and measurement record use different bin edges."""


class AllZeroPosterior(DSLError):
    """Every candidate has zero posterior weight."""


class ConfigError(DSLError, ValueError):
    """Malformed run configuration."""
