"""Exception hierarchy shared by all rankcdf modules."""


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class DimensionTooLargeError(ValidationError):
    """Requested dimension exceeds what an algorithm supports."""


class InputFileError(ValidationError):
    """A ranked-list file could not be parsed.

    The message always carries the file path and, where applicable, the
    offending line (and column).
    """

    def __init__(self, path, message, line=None, column=None):
        self.path = str(path)
        self.line = line
        self.column = column
        where = self.path
        if line is not None:
            where += f":{line}"
            if column is not None:
                where += f":{column}"
        super().__init__(f"{where}: {message}")
