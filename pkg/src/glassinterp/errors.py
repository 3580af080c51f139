"""Exception types raised across the package."""


class GlassInterpError(ValueError):
    """Base class for all input and hypothesis errors."""


class DimensionMismatch(GlassInterpError):
    pass


class NotSymmetric(GlassInterpError):
    def __init__(self, asymmetry: float, tol: float):
        super().__init__(f"max asymmetry {asymmetry:.3e} exceeds tolerance {tol:.3e}")
        self.asymmetry = asymmetry


class NotPSD(GlassInterpError):
    def __init__(self, min_eigenvalue: float, tol: float):
        super().__init__(f"most negative eigenvalue {min_eigenvalue:.6e} below -{tol:.3e}")
        self.min_eigenvalue = min_eigenvalue


class NegativeRadicand(GlassInterpError):
    pass


class FactorizationFailed(GlassInterpError):
    pass


class NonFinite(GlassInterpError):
    pass


class LengthMismatch(GlassInterpError):
    pass


class TooLarge(GlassInterpError):
    pass


class SpecInvalid(GlassInterpError):
    pass


class PathInvalid(GlassInterpError):
    pass


class ConfigInvalid(GlassInterpError):
    pass


class SplitInvalid(GlassInterpError):
    pass


class HypothesisViolated(GlassInterpError):
    def __init__(self, message: str, worst: float, pair: tuple[int, int]):
        super().__init__(f"{message}: worst mismatch {worst:.3e} at pair {pair}")
        self.worst = worst
        self.pair = pair
