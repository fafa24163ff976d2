"""Exception types shared across the package."""


class IcmseError(Exception):
    """Base class for all package-specific errors."""


class UnsupportedKernelError(IcmseError):
    """Closed-form integrals requested for a kernel family without them."""


class NumericalError(IcmseError):
    """Linear algebra or special-function evaluation failed beyond repair."""


class DegenerateTruncationError(NumericalError):
    """Truncation region has (numerically) zero probability."""


class ModelModeError(IcmseError):
    """Operation called on a fitted model of the wrong mode."""


class FitError(IcmseError):
    """Maximum-likelihood estimation failed in every restart."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ProposalError(IcmseError):
    """Criterion optimization produced no finite-valued candidate."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
