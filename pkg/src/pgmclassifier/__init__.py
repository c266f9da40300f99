"""Multi-class classification via the pretty good measurement.

Feature vectors are mapped to pure quantum states, each class is summarized
by the mixture of its encoded states (optionally lifted to tensor copies),
and the pretty good measurement built from those centroids scores samples
through the Born rule. A Gram-space engine keeps the construction tractable
at high copy counts. The package also ships the evaluation metric suite and
a seeded, reproducible grid-search experiment harness with a CLI.
"""

from .dataio import (
    FINGERPRINT_ALGORITHM,
    MODEL_FORMAT,
    REPORT_FORMAT,
    SPLITS_FORMAT,
    Dataset,
    LoadedModel,
    SplitsData,
    check_splits,
    features_for_model,
    fingerprint_bytes,
    fingerprint_file,
    load_dataset,
    load_model,
    read_splits,
    save_model,
    write_long_csv,
    write_predictions_csv,
    write_splits,
)
from .encoding import (
    ENCODINGS,
    NORMALIZERS,
    EncodingConfig,
    NormalizerParams,
    apply_normalizer,
    encode,
    encode_amplitude,
    encode_stereographic,
    fit_encode,
    fit_normalizer,
    rescale,
)
from .errors import (
    ClassSetMismatch,
    ClassSmallerThanK,
    DatasetFormatError,
    DenseBlowup,
    DimMismatch,
    EmptyClass,
    EmptyEvaluation,
    FingerprintMismatch,
    InvalidAlpha,
    InvalidFeature,
    InvalidOperator,
    LabelOutOfRange,
    MetricSetMismatch,
    NotPositiveSemidefinite,
    PgmError,
    SchemaMismatch,
    StratificationImpossible,
    UndefinedAuc,
)
from .metrics import (
    BinaryRates,
    MetricReport,
    WinLossMatrix,
    accuracy,
    auc_ovr,
    binary_rates,
    confusion,
    macro_accuracy,
    metric_difference,
    one_vs_rest_rates,
    report_from_predictions,
    win_loss,
)
from .operators import (
    DENSE_DIM_LIMIT,
    NEG_EIG_TOL,
    RANK_TOL,
    PinvSqrt,
    SpectralDecomposition,
    eig_sym,
    pinv_sqrt,
    psd_sqrt,
    symmetrize,
    tensor_power,
    trace_product,
)
from .pgm import (
    ClassEnsemble,
    DensePgmModel,
    GramPgmModel,
    LabeledStateSet,
    PgmConfig,
    Priors,
    argmax_smallest,
    build_dense_pgm,
    build_ensemble,
    build_gram_pgm,
    classify,
    copies_centroid,
    empirical_priors,
    explicit_priors,
    fit_pgm,
    mixture,
    predict_batch,
    quantum_centroid,
    round_scores,
    score,
    score_states,
    stable_power,
    uniform_priors,
)
from .selection import (
    DEFAULT_ALPHAS,
    DEFAULT_COPIES,
    Aggregate,
    FoldPlan,
    GridPoint,
    GridResult,
    ProtocolConfig,
    ProtocolResult,
    SelectionReport,
    SplitPlan,
    SplitRecord,
    cross_validated_metrics,
    default_grid,
    derive_seed,
    grid_search,
    make_grid,
    run_protocol,
    select_robust_config,
    stratified_holdout,
    stratified_kfold,
)

__version__ = "0.1.0"

__all__ = [
    "FINGERPRINT_ALGORITHM",
    "MODEL_FORMAT",
    "REPORT_FORMAT",
    "SPLITS_FORMAT",
    "Dataset",
    "LoadedModel",
    "SplitsData",
    "check_splits",
    "features_for_model",
    "fingerprint_bytes",
    "fingerprint_file",
    "load_dataset",
    "load_model",
    "read_splits",
    "save_model",
    "write_long_csv",
    "write_predictions_csv",
    "write_splits",
    "ENCODINGS",
    "NORMALIZERS",
    "EncodingConfig",
    "NormalizerParams",
    "apply_normalizer",
    "encode",
    "encode_amplitude",
    "encode_stereographic",
    "fit_encode",
    "fit_normalizer",
    "rescale",
    "ClassSetMismatch",
    "ClassSmallerThanK",
    "DatasetFormatError",
    "DenseBlowup",
    "DimMismatch",
    "EmptyClass",
    "EmptyEvaluation",
    "FingerprintMismatch",
    "InvalidAlpha",
    "InvalidFeature",
    "InvalidOperator",
    "LabelOutOfRange",
    "MetricSetMismatch",
    "NotPositiveSemidefinite",
    "PgmError",
    "SchemaMismatch",
    "StratificationImpossible",
    "UndefinedAuc",
    "BinaryRates",
    "MetricReport",
    "WinLossMatrix",
    "accuracy",
    "auc_ovr",
    "binary_rates",
    "confusion",
    "macro_accuracy",
    "metric_difference",
    "one_vs_rest_rates",
    "report_from_predictions",
    "win_loss",
    "DENSE_DIM_LIMIT",
    "NEG_EIG_TOL",
    "RANK_TOL",
    "PinvSqrt",
    "SpectralDecomposition",
    "eig_sym",
    "pinv_sqrt",
    "psd_sqrt",
    "symmetrize",
    "tensor_power",
    "trace_product",
    "ClassEnsemble",
    "DensePgmModel",
    "GramPgmModel",
    "LabeledStateSet",
    "PgmConfig",
    "Priors",
    "argmax_smallest",
    "build_dense_pgm",
    "build_ensemble",
    "build_gram_pgm",
    "classify",
    "copies_centroid",
    "empirical_priors",
    "explicit_priors",
    "fit_pgm",
    "mixture",
    "predict_batch",
    "quantum_centroid",
    "round_scores",
    "score",
    "score_states",
    "stable_power",
    "uniform_priors",
    "DEFAULT_ALPHAS",
    "DEFAULT_COPIES",
    "Aggregate",
    "FoldPlan",
    "GridPoint",
    "GridResult",
    "ProtocolConfig",
    "ProtocolResult",
    "SelectionReport",
    "SplitPlan",
    "SplitRecord",
    "cross_validated_metrics",
    "default_grid",
    "derive_seed",
    "grid_search",
    "make_grid",
    "run_protocol",
    "select_robust_config",
    "stratified_holdout",
    "stratified_kfold",
    "__version__",
]
