"""Exception hierarchy shared by every terradeep module."""


class TerraDeepError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(TerraDeepError, ValueError):
    """Array shapes do not satisfy an operation's preconditions."""


class ParameterError(TerraDeepError, ValueError):
    """A configuration value is outside its valid range."""


class DatasetError(TerraDeepError, ValueError):
    """A dataset is empty, unbalanced in an unsupported way, or mislabeled."""


class FormatError(TerraDeepError, ValueError):
    """An input file does not follow its documented format."""

    def __init__(self, message, path=None, line=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{': '.join(where)}: {message}" if where else message)
        self.path = path
        self.line = line


class OutlierError(TerraDeepError, ValueError):
    """A slip reading lies outside [0, 100] percent."""


class CatalogError(TerraDeepError, KeyError):
    """Unknown model-zoo entry."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class StateError(TerraDeepError, RuntimeError):
    """Cached activations no longer match the network state."""


class LabelError(TerraDeepError, ValueError):
    """A class label falls outside [0, k)."""


class InvariantError(TerraDeepError, AssertionError):
    """An internal consistency check on a result failed."""


class ExperimentError(TerraDeepError, RuntimeError):
    """One run of an evaluation protocol failed."""

    def __init__(self, run_index, cause):
        super().__init__(f"run {run_index} failed: {type(cause).__name__}: {cause}")
        self.run_index = run_index
        self.cause = cause
