"""Error types shared across the pipeline.

Each error class carries an exit code so the command-line driver can
distinguish input-validation problems, model-estimation failures, and bad
run configuration without string matching.
"""

from __future__ import annotations


class PipelineError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class ValidationError(PipelineError):
    """Malformed or inconsistent input data.

    Optionally carries the file, line, and column of the offending CSV
    cell; the location is folded into the message.
    """

    exit_code = 2

    def __init__(
        self,
        message: str,
        *,
        file: str | None = None,
        line: int | None = None,
        column: str | None = None,
    ) -> None:
        self.file = file
        self.line = line
        self.column = column
        prefix = ""
        if file is not None:
            prefix = str(file)
            if line is not None:
                prefix += f":{line}"
            if column is not None:
                prefix += f":{column}"
            prefix += ": "
        super().__init__(prefix + message)


class EstimationError(PipelineError):
    """Model fitting failed (non-finite objective or degenerate inputs)."""

    exit_code = 3


class ConfigurationError(PipelineError):
    """The requested run cannot be assembled from the given inputs."""

    exit_code = 4
