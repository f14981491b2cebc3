"""Exception hierarchy shared across the pipeline.

Each class carries the CLI exit code it maps to: 1 usage/config,
2 missing or stale artifact, 3 data error.
"""


class AcadSearchError(Exception):
    exit_code = 1


class ConfigError(AcadSearchError):
    exit_code = 1


class MissingArtifactError(AcadSearchError):
    exit_code = 2


class StaleArtifactError(AcadSearchError):
    exit_code = 2


class DataFormatError(AcadSearchError):
    exit_code = 3


class SplitError(DataFormatError):
    pass
