"""Exception types raised by the planner and simulator."""


class InvertibilityError(ValueError):
    """An observed batch-negative rate has no matching infection rate."""


class NoFiniteOptimum(ValueError):
    """The expected-cost objective has no interior stationary point."""


class BatchingNotBeneficial(ValueError):
    """Pooling costs at least as much as testing everyone individually."""

    def __init__(self, message, best_n=None):
        super().__init__(message)
        self.best_n = best_n


class StrategyError(ValueError):
    """A strategy was configured with inconsistent parameters."""


class SimulationError(RuntimeError):
    """A single simulated run failed; carries the grid coordinate."""

    def __init__(self, strategy, rate, repetition, cause):
        super().__init__(
            f"strategy={strategy} rate={rate} repetition={repetition}: {cause}"
        )
        self.strategy = strategy
        self.rate = rate
        self.repetition = repetition
        self.cause = cause
