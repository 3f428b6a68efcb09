"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Inputs have incompatible or insufficient shapes."""


class CapabilityError(ValueError):
    """The requested problem size exceeds what an exact routine supports."""


class SamplerError(RuntimeError):
    """The truncated-normal sampler cannot produce a usable chain."""


class ConvergenceError(RuntimeError):
    """An iterative routine stopped before meeting its tolerance.

    The last iterate is kept on ``last_iterate`` so callers can inspect it.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate
