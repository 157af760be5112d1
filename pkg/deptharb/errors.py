"""Exceptions raised by the guidance engine"""


class DepthArbError(Exception):
    """Base class for every error the engine raises on purpose."""


class SceneValidationError(DepthArbError, ValueError):
    """A scene file or scene object broke the layout contract."""

    def __init__(self, message: str, object_index: int | None = None, field: str = ""):
        self.object_index = object_index
        self.field = field
        if object_index is not None:
            message = f"object {object_index}, field '{field}': {message}"
        elif field:
            message = f"field '{field}': {message}"
        super().__init__(message)


class ConfigError(DepthArbError, ValueError):
    def __init__(self, message: str, field: str = ""):
        self.field = field
        super().__init__(f"config '{field}': {message}" if field else message)


class ShapeMismatchError(DepthArbError, ValueError):
    pass


class DumpFormatError(DepthArbError, ValueError):
    pass


class NumericalAbortError(DepthArbError, ArithmeticError):
    """Loss or gradient went non-finite during optimization."""

    def __init__(self, step: int, what: str):
        self.step = step
        self.what = what
        super().__init__(f"non-finite {what} at step {step}")
