"""Exception types raised by the library."""


class BudgetExceededError(ValueError):
    """A point set would exceed the configured point budget."""


class RankDeficientError(ValueError):
    """A least-squares design matrix does not have full column rank."""


class ConvergenceError(RuntimeError):
    """The mode search or Hessian regularization did not converge."""


class DisjointSupportError(ValueError):
    """Two densities were compared on supports that do not overlap."""
