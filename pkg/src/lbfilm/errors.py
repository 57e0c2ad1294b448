"""Exception types shared across the solver modules."""


class BlowUpError(RuntimeError):
    """Shooting trajectory escaped the invariant region before y = 1."""

    def __init__(self, y_stop, z):
        super().__init__(f"trajectory blew up at y = {y_stop:.6f} (z = {z:.6g})")
        self.y_stop = y_stop
        self.z = z


class StepUnderflowError(RuntimeError):
    """Adaptive integrator step size collapsed below the working precision."""


class NoConvergenceError(RuntimeError):
    """Iteration budget exhausted without meeting the residual tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SingularJacobianError(RuntimeError):
    """Newton matrix numerically singular, typically near a branch point."""


class ContinuationStalledError(RuntimeError):
    """Parameter step in a continuation run underflowed without convergence."""


class NonFiniteStateError(RuntimeError):
    """A time step produced NaN or Inf values."""


class ConfigError(ValueError):
    """Configuration text failed to parse or validate; carries a line number."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no
