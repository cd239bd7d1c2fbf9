"""Exception hierarchy shared by all modules."""


class ArchsageError(Exception):
    """Base class for expected, user-facing failures."""


class InvalidSpecError(ArchsageError, ValueError):
    def __init__(self, code, message=""):
        self.code = code
        super().__init__(f"{code.name}: {message}" if message else code.name)


class SamplingExhausted(ArchsageError, RuntimeError):
    pass


class ShapeMismatch(ArchsageError, ValueError):
    pass


class NonFiniteError(ArchsageError, FloatingPointError):
    pass


class NonDeterministicLoss(ArchsageError, RuntimeError):
    pass


class EmptyLabeledError(ArchsageError, ValueError):
    pass


class LengthMismatch(ArchsageError, ValueError):
    pass


class DegenerateInput(ArchsageError, ValueError):
    pass


class DatasetError(ArchsageError):
    pass


class ParseError(DatasetError):
    def __init__(self, lineno, message):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


class SchemaError(DatasetError):
    def __init__(self, lineno, message):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


class CheckpointError(ArchsageError):
    pass
