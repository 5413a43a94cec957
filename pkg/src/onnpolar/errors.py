"""Exception types shared across the package.

Invalid arguments raise the builtin :class:`ValueError`.
"""


class NumericFailure(ArithmeticError):
    """An iterative numeric routine did not converge or left its valid range."""


class InvalidState(RuntimeError):
    """An operation was called on an object that is not ready for it."""


class TrainingDiverged(RuntimeError):
    """Training mse blew past the divergence guard."""

    def __init__(self, epoch, mse):
        super().__init__(f"training diverged at epoch {epoch} (mse={mse:.3e})")
        self.epoch = epoch
        self.mse = mse
