"""Exception types shared across the pipeline.

The CLI maps ConfigError to exit code 2 (usage/validation) and every other
PipelineError to exit code 1 (data/runtime).
"""


class PipelineError(Exception):
    """Base class for data and configuration failures surfaced to the CLI."""


class ParseError(PipelineError):
    """A file failed to parse; the message names the file and line."""


class SceneIntegrityError(PipelineError):
    """Referential or ordering constraint violated in a loaded scene."""


class CoverageError(PipelineError):
    """A track or label does not cover the requested time range."""


class AssociationError(PipelineError):
    """An obstacle could not be associated with any lane."""


class JoinError(PipelineError):
    """Keyed join between prediction and dataset files failed."""


class ConfigError(PipelineError):
    """Invalid configuration value or malformed command-line input."""
