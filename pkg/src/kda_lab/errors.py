"""Exception types shared across the lab."""


class ShapeError(ValueError):
    """Operands have incompatible or invalid shapes."""


class ContractError(ValueError):
    """An input violates a documented precondition."""


class NumericError(ArithmeticError):
    """A computation produced NaN/Inf; carries the offending step when known."""

    def __init__(self, msg, step=None):
        super().__init__(msg if step is None else f"{msg} (step {step})")
        self.step = step
