"""Federated intrusion detection on tabular traffic captures.

The pipeline: load and clean a labeled CSV, rebalance it (SMOTE plus
per-class isolation-forest pruning), split it across two edge devices and
a central server, train boosted-tree classifiers locally, exchange only
serialized models over a checksummed binary protocol, and aggregate them
into a voting ensemble scored per round.
"""

from .dataio import (
    TRAFFIC_LABELS,
    ColumnSchema,
    Dataset,
    LabelMap,
    LoadReport,
    SplitPair,
    class_histogram,
    concatenate,
    load_csv,
    load_csv_with_report,
    partition,
    train_test_split,
    write_csv,
)
from .errors import (
    ChecksumError,
    ConfigError,
    DataError,
    FidsError,
    MagicError,
    TagError,
    TruncatedError,
    VersionError,
    WireError,
)
from .federation import (
    EnsembleModel,
    RoundConfig,
    RoundReport,
    build_ensemble,
    decode_frame,
    deserialize_ensemble,
    deserialize_model,
    encode_frame,
    ensemble_predict,
    run_federated_simulation,
    serialize_ensemble,
    serialize_model,
)
from .gbdt import (
    GbdtModel,
    GbdtParams,
    GridSpec,
    accuracy_on,
    fit,
    grid_search,
    logloss,
    predict,
    predict_proba,
)
from .metrics import (
    ConfusionMatrix,
    Scores,
    accuracy,
    cohen_kappa,
    confusion,
    format_percent,
    macro_precision,
    macro_recall,
    summarize,
)
from .preprocess import (
    IsolationForest,
    SmoteConfig,
    anomaly_scores,
    fit_isolation_forest,
    remove_outliers,
    smote_resample,
)

__version__ = "0.1.0"

__all__ = [
    "TRAFFIC_LABELS",
    "ColumnSchema",
    "Dataset",
    "LabelMap",
    "LoadReport",
    "SplitPair",
    "class_histogram",
    "concatenate",
    "load_csv",
    "load_csv_with_report",
    "partition",
    "train_test_split",
    "write_csv",
    "ChecksumError",
    "ConfigError",
    "DataError",
    "FidsError",
    "MagicError",
    "TagError",
    "TruncatedError",
    "VersionError",
    "WireError",
    "EnsembleModel",
    "RoundConfig",
    "RoundReport",
    "build_ensemble",
    "decode_frame",
    "deserialize_ensemble",
    "deserialize_model",
    "encode_frame",
    "ensemble_predict",
    "run_federated_simulation",
    "serialize_ensemble",
    "serialize_model",
    "GbdtModel",
    "GbdtParams",
    "GridSpec",
    "accuracy_on",
    "fit",
    "grid_search",
    "logloss",
    "predict",
    "predict_proba",
    "ConfusionMatrix",
    "Scores",
    "accuracy",
    "cohen_kappa",
    "confusion",
    "format_percent",
    "macro_precision",
    "macro_recall",
    "summarize",
    "IsolationForest",
    "SmoteConfig",
    "anomaly_scores",
    "fit_isolation_forest",
    "remove_outliers",
    "smote_resample",
    "__version__",
]
