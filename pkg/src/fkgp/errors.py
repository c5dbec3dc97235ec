"""Exception types shared across the package."""


class FkgpError(Exception):
    """Base class for all errors raised by this package."""


class CoefficientError(FkgpError):
    """A coefficient callable produced a non-finite value.

    Carries the coefficient name and the (t, x) location that triggered it.
    """

    def __init__(self, coefficient, t, x, message=None):
        self.coefficient = coefficient
        self.t = t
        self.x = x
        super().__init__(
            message
            or f"coefficient {coefficient!r} returned a non-finite value at t={t}, x={x}"
        )


class PathBlowupError(FkgpError):
    """A simulated diffusion path left the representable range."""

    def __init__(self, step, point_index=None, sample_index=None):
        self.step = step
        self.point_index = point_index
        self.sample_index = sample_index
        where = f"step {step}"
        if point_index is not None:
            where += f", point {point_index}"
        if sample_index is not None:
            where += f", sample {sample_index}"
        super().__init__(f"non-finite path state at {where}")


class LinearizationError(FkgpError):
    """No admissible scale factor exists for the exponential transform."""

    def __init__(self, residual, message=None):
        self.residual = residual
        super().__init__(
            message
            or f"diffusion and control matrices are not proportional "
            f"(relative residual {residual:.3e})"
        )


class DomainError(FkgpError):
    """An input value lies outside the operation's domain."""

    def __init__(self, message, index=None):
        self.index = index
        super().__init__(message)


class FactorizationError(FkgpError):
    """Cholesky factorization failed even after jitter escalation."""

    def __init__(self, max_jitter, message=None):
        self.max_jitter = max_jitter
        super().__init__(
            message
            or f"matrix is not positive definite even with jitter {max_jitter:.3e}"
        )


class OptimizationError(FkgpError):
    """Hyperparameter search failed in every restart."""


class ConfigError(FkgpError):
    """An experiment configuration is invalid."""
