"""Exception types shared across the package."""


class RoqjError(Exception):
    """Base class for all package errors."""


class NonHermitianInput(RoqjError):
    pass


class DimensionMismatch(RoqjError):
    pass


class DimensionNotTwo(RoqjError):
    pass


class NegativeRate(RoqjError):
    """A rate-operator eigenvalue is negative beyond tolerance: the
    unraveling is invalid at this (t, psi)."""

    def __init__(self, eigenvalue, t=None, state=None):
        self.eigenvalue = eigenvalue
        self.t = t
        self.state = state
        super().__init__(
            f"negative jump rate {eigenvalue:.6e} at t={t}: unraveling invalid here"
        )


class NegativeCoefficient(RoqjError):
    """An MCWF coefficient c_alpha(t) is negative: MCWF is undefined."""

    def __init__(self, alpha, t, value):
        self.alpha = alpha
        self.t = t
        self.value = value
        super().__init__(
            f"channel {alpha} has coefficient {value:.6e} < 0 at t={t}: MCWF undefined"
        )


class TimestepTooLarge(RoqjError):
    pass


class CondTwoViolated(RoqjError):
    """No basis was supplied in which the dissipator's Choi coefficients
    are all real, so the fixed-post-jump construction does not apply."""


class NotPDivisible(RoqjError):
    pass


class ExplicitFormRequired(RoqjError):
    """The operation needs a representation with explicit (L_alpha, c_alpha)
    channels, not a shifted map closure."""


class SchemaError(RoqjError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class NormalizationError(RoqjError):
    pass


class OffGridTime(RoqjError):
    pass


class UndefinedPhase(RoqjError):
    pass


class ReconstructionMismatch(RoqjError):
    pass


class StepInstability(RoqjError):
    pass


class NonPauliModel(RoqjError):
    pass
