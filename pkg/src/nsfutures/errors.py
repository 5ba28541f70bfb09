"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: configuration problems exit with 1,
bad input data with 2, numerical failures with 3.
"""


class NSFuturesError(Exception):
    exit_code = 1


class ConfigError(NSFuturesError, ValueError):
    """Invalid configuration, unknown commodity or empty universe."""

    exit_code = 1


class DataError(NSFuturesError, ValueError):
    """Input file violates its schema or an invariant."""

    exit_code = 2

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{':'.join(where)}: {message}"
        super().__init__(message)


class ParseError(DataError):
    pass


class DuplicateError(DataError):
    pass


class DomainError(NSFuturesError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    exit_code = 3


class FitError(NSFuturesError, ArithmeticError):
    """Rank-deficient or otherwise unsolvable least-squares problem."""

    exit_code = 3


class Unavailable(DataError):
    """A commodity-day lacks the prices an operation needs."""
