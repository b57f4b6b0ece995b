"""Exception types shared across the package."""


class ContractError(ValueError):
    """An operation was called with arguments violating its preconditions."""


class CapacityError(ContractError):
    """The ambient truncation cannot host the requested object.

    ``required`` carries the block count that would be needed.
    """

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required
