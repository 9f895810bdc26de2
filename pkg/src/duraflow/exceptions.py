"""Exception types shared across the duraflow package."""


class DuraflowError(Exception):
    """Base class for all duraflow errors; the CLI maps these to exit code 1."""


class MissingHeader(DuraflowError):
    """CSV input has no header row, or a required column is absent in strict mode."""


class TooFewRows(DuraflowError):
    """Not enough rows for the requested operation (e.g. quantile trimming)."""


class AllMissingColumn(DuraflowError):
    """A modeling column has no observed value in the fitting data."""


class SchemaMismatch(DuraflowError):
    """Input rows do not match the schema a fitted artifact was built against."""


class SingleClassTraining(DuraflowError):
    """Classifier training data contains only one label."""


class EmptyBranch(DuraflowError):
    """A bi-level branch has too few rows to train a regressor."""


class ZeroActual(DuraflowError):
    """Relative error is undefined because an actual value is zero."""


class EmptyInput(DuraflowError):
    """An operation requiring at least one element received none."""


class MissingCovers(DuraflowError):
    """Tree node sample counts are unavailable, so path-dependent SHAP cannot run."""
