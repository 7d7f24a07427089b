from typing import Optional


class TensorJLError(Exception):
    """Base class for errors raised by tensorjl."""


class ShapeMismatchError(TensorJLError, ValueError):
    pass


class OracleCapError(TensorJLError, ValueError):
    """Dense materialization would exceed the configured element cap."""


class InvalidParameterError(TensorJLError, ValueError):
    pass


class DegenerateInputError(TensorJLError, ValueError):
    pass


class ConfigurationError(TensorJLError, ValueError):
    pass


class DatasetError(TensorJLError, ValueError):
    def __init__(self, message: str, offset: Optional[int] = None) -> None:
        super().__init__(
            message if offset is None else f"{message} (at byte offset {offset})"
        )
        self.offset = offset
