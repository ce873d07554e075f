"""Exception types raised by the pipeline.

Every error that stems from bad input data derives from :class:`DataError` so
the command-line front end can map it to the data-error exit code.
"""


class DataError(Exception):
    """Input data is missing, malformed or inconsistent."""


class TranscriptError(DataError):
    def __init__(self, message, line=None, field=None):
        self.message = message
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class RulesetError(DataError):
    pass


class TaggerError(DataError):
    pass


class FeatureError(DataError):
    pass


class SchemaMismatchError(DataError):
    """Feature vectors were built against a different schema than the model."""


class ModelFormatError(DataError):
    """A model file is corrupt or carries an unsupported format version."""
