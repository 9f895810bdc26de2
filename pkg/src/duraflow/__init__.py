"""duraflow: bi-level traffic accident duration prediction toolkit."""

from .bilevel import (
    BilevelDurationModel,
    ConstantClassifier,
    FixedLabelClassifier,
    evaluate_bilevel,
)
from .binning import QuantileBinner
from .ensembles import GradientBoostedTreeRegressor, RandomForestBinaryClassifier
from .explain import ShapSummary, ShapVector, shap_for_row, shap_summary, shap_values
from .ingest import FilterSpec, RawAccidentRecord, filter_records, parse_records
from .metrics import classification_report, mae, relative_error, rmse
from .model_io import load_model, save_model
from .preprocess import (
    EncodedDataset,
    FeatureSchema,
    MeanModeImputer,
    PreprocessConfig,
    SplitSpec,
    TabularEncoder,
    compute_duration,
    label_duration,
    prepare_dataset,
    split_dataset,
    trim_outliers,
)

__version__ = "0.1.0"

__all__ = [
    "BilevelDurationModel",
    "ConstantClassifier",
    "EncodedDataset",
    "FeatureSchema",
    "FilterSpec",
    "FixedLabelClassifier",
    "GradientBoostedTreeRegressor",
    "MeanModeImputer",
    "PreprocessConfig",
    "QuantileBinner",
    "RandomForestBinaryClassifier",
    "RawAccidentRecord",
    "ShapSummary",
    "ShapVector",
    "SplitSpec",
    "TabularEncoder",
    "classification_report",
    "compute_duration",
    "evaluate_bilevel",
    "filter_records",
    "label_duration",
    "load_model",
    "mae",
    "parse_records",
    "prepare_dataset",
    "relative_error",
    "rmse",
    "save_model",
    "shap_for_row",
    "shap_summary",
    "shap_values",
    "split_dataset",
    "trim_outliers",
]
