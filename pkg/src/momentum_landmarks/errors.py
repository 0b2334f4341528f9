"""Exception types raised across the package."""


class LandmarkError(Exception):
    """Base class for all package errors."""


class KernelError(LandmarkError, ValueError):
    """Invalid kernel parameters or a kernel evaluation that failed."""


class DegenerateRadiusError(KernelError):
    """Radial derivative requested at (or below) the coincidence cutoff."""


class DivergenceError(LandmarkError, FloatingPointError):
    """The particle integrator produced a non-finite state."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class ConversionError(LandmarkError, ArithmeticError):
    """Velocity-to-momentum conversion failed on an ill-conditioned Gram matrix."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class ShootingError(LandmarkError):
    """The Log-map iteration could not be carried out."""


class AveragingError(LandmarkError):
    """A group member could not be matched from the current average."""

    def __init__(self, message, member=None):
        super().__init__(message)
        self.member = member


class FitError(LandmarkError):
    """A posterior fit could not be run on the supplied sample."""


class ContourError(LandmarkError):
    """Highest-density contour extraction failed."""


class IngestionError(LandmarkError, ValueError):
    """A template or manifest file violates the expected schema."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line
