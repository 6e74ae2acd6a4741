"""Exception hierarchy shared by all sglab modules."""


class SGLabError(Exception):
    """Base class for every error raised by sglab."""


class ConfigDegenerate(SGLabError, ValueError):
    """Wave vectors coincide or are opposite, so a coefficient is singular."""


class NearSingular(SGLabError):
    """Evaluation requested too close to the singular set of the gauge pair."""


class QuadratureFailure(SGLabError):
    """Adaptive quadrature could not certify the requested accuracy."""


class FactorizationBreakdown(SGLabError):
    """Symmetric factorization produced a zero or non-symmetric pivot sequence."""


class StepTooCoarse(SGLabError):
    """Integration step does not resolve the Lax coefficient matrix."""


class TruncationTooShort(SGLabError):
    """The Lax coefficient has not reached its constant limit at the truncation edge."""


class CountMismatch(SGLabError):
    """Nodal tracing found a number of arcs different from 2n."""

    def __init__(self, message, found=None, expected=None):
        super().__init__(message)
        self.found = found
        self.expected = expected


class NoZeroCrossing(SGLabError):
    """A transverse slice across an end has no sign change."""


class SchemaError(SGLabError):
    """Config document does not follow the expected JSON schema."""


class InvariantError(SGLabError):
    """Config document is well formed but violates a parameter invariant."""
