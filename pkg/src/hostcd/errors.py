class DataError(ValueError):
    """Input data is malformed or violates a precondition."""


class NumericError(ArithmeticError):
    """A numerical routine produced non-finite values."""
