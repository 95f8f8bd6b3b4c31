# utils/errors.py
"""Error hierarchy shared by the tools and agents. main.py maps exit_code to the process status."""


class LigtError(Exception):
    exit_code = 1


class DatasetIOError(LigtError):
    """Missing, unreadable or unwritable input/output file."""
    exit_code = 2


class SchemaError(LigtError):
    """A record violates the documents/samples/predictions schema."""
    exit_code = 3

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field is not None:
            location.append(f"field '{field}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")


class LayoutHashError(LigtError):
    exit_code = 3


class DivergenceError(LigtError):
    """Non-finite loss during training or gradient checking."""
    exit_code = 4


class ConfigError(LigtError, ValueError):
    """Invalid settings: a grid, model, metric or training option outside its range."""
    exit_code = 5
