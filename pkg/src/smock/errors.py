"""Exception hierarchy; each class carries the CLI exit code it maps to."""


class SmockError(Exception):
    exit_code = 1


class PatternSyntaxError(SmockError):
    exit_code = 2

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)


class ValidationError(SmockError):
    exit_code = 3


class DomainError(SmockError):
    exit_code = 4


class PreconditionError(DomainError):
    pass


class BudgetExceeded(SmockError):
    exit_code = 5
