"""Exception hierarchy shared by all lab modules."""


class LabError(Exception):
    """Base class for every error raised by the lab."""


class RationalityError(LabError):
    """The continued fraction stream terminated: the input is rational."""


class PrecisionError(LabError):
    """Requested precision cannot be certified.

    ``last_index`` names the last quotient/convergent index that is still
    trustworthy (``None`` when not applicable).
    """

    def __init__(self, message, last_index=None):
        super().__init__(message)
        self.last_index = last_index


class BudgetError(LabError):
    """An iteration budget was exhausted before a tolerance was certified."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class DomainError(LabError):
    """Argument outside the domain of the operation."""


class RefinementError(LabError):
    """Grid refinement did not converge."""

    def __init__(self, message, estimates=None):
        super().__init__(message)
        self.estimates = estimates


class RotationMismatchError(LabError):
    """The lift's rotation number is not the claimed one (m_n changes sign)."""


class CombinatoricsError(LabError):
    """Interval combinatorics of the irrational rotation are violated."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class EstimateViolation(LabError):
    """A verified inequality failed; ``report`` carries the witnesses."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class GateError(LabError):
    """A premise gate of an asymptotic statement is not met."""


class BandEscapeError(LabError):
    """A complex orbit left the band of analyticity."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class BranchError(LabError):
    """Re Dg is not positive on the band, log Dg is not univalued."""


class InverseError(LabError):
    """Newton inversion of a germ failed to converge."""


class InconsistencyError(LabError):
    """Internal invariant of an approximation is broken."""


class LeafEscapeError(LabError):
    """A leaf left the admissible domain during holonomy integration."""

    def __init__(self, message, theta=None):
        super().__init__(message)
        self.theta = theta


class StiffnessError(LabError):
    """Adaptive step size underflowed during integration."""


class ModelError(LabError):
    """The model assumptions (e.g. unit-modulus multiplier) are violated."""


class FitError(LabError):
    """Polynomial fit residual above threshold."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConfigError(LabError):
    """Experiment configuration failed validation.

    ``path`` is the JSON path of the offending field.
    """

    def __init__(self, message, path=""):
        super().__init__(message)
        self.path = path


class DeckSearchError(LabError):
    """The minimum over deck translations did not stabilize within the search range."""


class PartialRunError(LabError):
    """An experiment failed mid-run; ``path`` keeps the partial artifacts."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path
