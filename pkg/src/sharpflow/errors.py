"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Bad user-facing configuration: unknown names, invalid parameters."""


class ContractViolation(ValueError):
    """An argument broke a documented precondition (shapes, monotonicity, sign)."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values or underflowed past repair."""


class TrainingDiverged(RuntimeError):
    """Training loss became non-finite."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"training loss became non-finite at step {step}")


class TrajectoryBlowup(RuntimeError):
    """Euler integration produced a non-finite state."""

    def __init__(self, trajectory, step, message=None):
        self.trajectory = trajectory
        self.step = step
        super().__init__(
            message
            or f"non-finite state in trajectory {trajectory} at step {step}"
        )


class DegenerateProfileError(ValueError):
    """All profile mass vanished; raise the additive floor eps_a."""


class UnsupportedOracleError(TypeError):
    """The field does not expose the closed forms this oracle needs."""
