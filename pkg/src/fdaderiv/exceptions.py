"""Exception types raised by fdaderiv."""


class FdaDerivError(Exception):
    """Base class for all package errors."""


class OrderExceededError(FdaDerivError, ValueError):
    """A derivative index has larger total order than the polynomial order."""


class InvalidDensityError(FdaDerivError, ValueError):
    """A design density violates its positivity/boundedness/normalisation."""


class EmptyGridError(FdaDerivError, ValueError):
    pass


class SingularDesignError(FdaDerivError, ArithmeticError):
    """The local moment matrix is (numerically) singular at ``(x, h)``."""

    def __init__(self, x, h, eigenvalue, floor):
        self.x = x
        self.h = h
        self.eigenvalue = eigenvalue
        self.floor = floor
        super().__init__(
            f"singular local design at x={x!r}, h={h:g}: smallest eigenvalue "
            f"{eigenvalue:.3e} below floor {floor:.3e}"
        )


class NoValidBandwidthError(FdaDerivError, ValueError):
    pass


class NumericalError(FdaDerivError, ArithmeticError):
    pass


class UndefinedExponentError(FdaDerivError, ValueError):
    pass


class ConfigError(FdaDerivError, ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class DataFormatError(FdaDerivError, ValueError):
    """Malformed input file; carries the 1-based row/column when known."""

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
