"""Exception types shared by every module."""


class DomainError(ValueError):
    """An input violates an operation's precondition."""


class BudgetExceeded(RuntimeError):
    """A computation would exceed its configured work budget.

    ``partial`` carries whatever was computed before the cutoff.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
