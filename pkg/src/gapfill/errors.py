"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes, so raising the right class matters:
ConfigError -> 1 (usage/configuration), DataError -> 2 (bad input data),
anything else derived from GapfillError -> 3 (runtime failure).
"""


class GapfillError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(GapfillError):
    """Invalid configuration, CLI usage, or schema violation."""


class DataError(GapfillError):
    """Input data violates a precondition (shape, step, missingness)."""


class TrainingDiverged(GapfillError):
    """A training run produced a non-finite loss and was aborted."""

    def __init__(self, epoch: int, step: int, loss: float):
        self.epoch = epoch
        self.step = step
        self.loss = loss
        super().__init__(
            f"non-finite loss {loss!r} at epoch {epoch}, step {step}"
        )


class SpaceExhausted(GapfillError):
    """Every point of the hyperparameter grid has been evaluated."""
