"""Exception hierarchy shared by every hvacbench module."""


class HvacBenchError(Exception):
    """Base class for all benchmark errors."""


class ConfigurationError(HvacBenchError):
    """Bad dimensions, windows, bounds, missing artifacts or invalid config files."""


class NonFiniteStateError(HvacBenchError):
    """A rollout produced NaN/inf temperatures or costs."""


class SolverDivergenceError(HvacBenchError):
    """Trajectory solver objective became non-finite."""


class SingularSystemError(HvacBenchError):
    """Reduced KKT system could not be factorised even after regularisation."""


class TrainingHaltedError(HvacBenchError):
    """Non-finite loss or gradient during training."""


class StepOutOfRangeError(HvacBenchError, IndexError):
    """Step index outside [0, N)."""
