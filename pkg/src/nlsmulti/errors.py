"""Exception hierarchy and warning categories.

Every error carries an ``exit_code`` so the command line front end can map
failures onto its documented exit statuses without string matching.
"""


class NLSMultiError(Exception):
    exit_code = 3


class ConfigError(NLSMultiError, ValueError):
    """Invalid argument or configuration value."""
    exit_code = 2


class GridError(ConfigError):
    """Grid too small or too coarse for the requested object."""


class NumericalError(NLSMultiError):
    exit_code = 3


class BlowUpError(NumericalError):
    """Non-finite values or runaway amplitude during time stepping."""

    def __init__(self, msg, t=None, max_amplitude=None):
        super().__init__(msg if t is None else f"{msg} (t = {t:.6g})")
        self.t = t
        self.max_amplitude = max_amplitude


class SpectralError(NumericalError):
    """No localized purely imaginary eigenpair was found."""

    def __init__(self, msg, candidates=()):
        super().__init__(msg)
        self.candidates = list(candidates)


class FrameDegeneracyError(NumericalError):
    """Gram matrix of a discrete frame is too ill conditioned."""

    def __init__(self, msg, cond=None, pair=None):
        super().__init__(msg)
        self.cond = cond
        self.pair = pair


class ExtractionError(NumericalError):
    """Modulation Newton iteration failed to converge."""

    def __init__(self, msg, residual=None, best=None, t=None):
        super().__init__(msg if t is None else f"{msg} (t = {t:.6g})")
        self.residual = residual
        self.best = best
        self.t = t


class ShootingError(NumericalError):
    """Root finding for the unstable coefficients failed."""

    def __init__(self, msg, history=()):
        super().__init__(msg)
        self.history = list(history)


class VerifierFailure(NLSMultiError):
    exit_code = 4


class TruncationWarning(UserWarning):
    """A localized profile has not decayed before the box edge."""


class StabilityWarning(UserWarning):
    """Step size is large compared with the local nonlinear time scale."""
