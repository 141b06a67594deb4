from typing import Optional


class ConfigurationError(ValueError):
    pass


class ExpertFailureError(RuntimeError):
    pass


class DemoFormatError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None, record: Optional[str] = None):
        location = []
        if line is not None:
            location.append(f"line {line}")
        if record is not None:
            location.append(f"record {record}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.line = line
        self.record = record


class DemoVersionError(DemoFormatError):
    pass


class ChecksumMismatchError(DemoFormatError):
    pass


class SnapshotMismatchError(TypeError):
    pass


class EpisodeFinishedError(RuntimeError):
    pass


class ShapeError(ValueError):
    pass


class NumericalError(FloatingPointError):
    pass


class CheckpointError(ValueError):
    pass
