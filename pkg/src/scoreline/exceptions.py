"""Exception and warning types shared across the package."""


class ScorelineError(Exception):
    """Base class for all scoreline errors."""


class RangeError(ScorelineError, ValueError):
    """A numeric argument is outside its legal range (e.g. negative time)."""


class IdentityError(ScorelineError, ValueError):
    """A duplicate or unresolvable object id."""


class StateError(ScorelineError, RuntimeError):
    """An operation was called on an object in the wrong lifecycle state,
    e.g. mutating a frozen part or computing features on an unfrozen one."""


class ParseError(ScorelineError, ValueError):
    """Input document could not be parsed.

    Carries an optional source location so CLI messages can point at the
    offending line/column.
    """

    def __init__(self, message, source=None, line=None, column=None):
        self.source = source
        self.line = line
        self.column = column
        loc = ""
        if source is not None:
            loc += str(source)
        if line is not None:
            loc += f":{line}"
            if column is not None:
                loc += f":{column}"
        super().__init__(f"{loc}: {message}" if loc else message)


class FormatDetectionError(ParseError):
    """None of the known format signatures matched the input."""


class MissingContextError(ScorelineError):
    """An operation needs score context (e.g. a time signature) that the
    part does not provide."""


class EmptyInputError(ScorelineError, ValueError):
    """An estimator was called on a source without any notes."""


class DegenerateInputError(ScorelineError, ValueError):
    """Input is statistically degenerate for the requested analysis
    (e.g. a constant pitch-class distribution has no defined correlation)."""


class StructureError(ScorelineError, ValueError):
    """The score's repetition structure is inconsistent (unpaired repeats,
    voltas outside a repeated section, ...)."""


class EncodeError(ScorelineError, ValueError):
    """Content cannot be represented in the requested output format."""


class FeatureError(ScorelineError):
    """A user-supplied per-note feature function failed."""

    def __init__(self, feature_name, note_id, cause):
        self.feature_name = feature_name
        self.note_id = note_id
        super().__init__(
            f"feature {feature_name!r} failed on note {note_id!r}: {cause}"
        )


class ScorelineWarning(UserWarning):
    """Base class for non-fatal conditions (skipped elements, fallbacks)."""
