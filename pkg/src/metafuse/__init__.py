"""Fusing deep image features with encoded patient metadata.

The package covers the full tabular-plus-image experiment loop: encode a
metadata table to numeric columns, append it to externally extracted image
feature vectors, make a seeded stratified split, train paired softmax
classifiers (image-only versus fused), and report per-class metrics,
percentage-point improvements with an exact significance test, and learned
weight breakdowns.  Scalogram montage rendering and seeded augmentation
cover the signal-to-image and robustness paths.
"""

__version__ = "0.1.0"

from .augment import AugmentSpec, Transform, apply_transform, augment, draw_transform
from .classifier import (
    SoftmaxModel,
    TrainConfig,
    load_model,
    loss_and_gradient,
    predict,
    predict_proba,
    save_model,
    train,
)
from .errors import (
    AlignmentError,
    ConfigError,
    DivergenceError,
    EncodingError,
    FormatError,
    FusionError,
    InputError,
    MetafuseError,
    ParameterError,
    SchemaError,
    SplitError,
    StageError,
    StoreError,
    TrainingError,
)
from .features import (
    FeatureMatrix,
    FeatureStore,
    FusedMatrix,
    fuse,
    provider_get,
    read_fmx,
    write_fmx,
)
from .interpret import WeightReport, magnitude_ratio, shared_bin_edges, split_weights
from .metadata import (
    MetadataRecord,
    MetadataSchema,
    SchemaColumn,
    build_schema,
    encode_record,
    encode_table,
    load_metadata_table,
    load_schema_declaration,
)
from .metrics import (
    METRIC_NAMES,
    ConfusionCounts,
    ImprovementReport,
    MetricReport,
    auroc,
    build_report,
    class_metrics,
    compare_auroc,
    confusion,
    improvement,
    improvement_delta,
    macro,
    report_from_json,
    significance_stars,
    wilcoxon_exact,
)
from .pipeline import ExperimentConfig, RunResult, run_experiment, stage_seed
from .scalograms import (
    EcgSignal,
    ScalogramMontage,
    montage,
    read_signal_csv,
    render_scalogram,
    write_montage_png,
)
from .splits import (
    DatasetIndex,
    apply_label_map,
    bundled_label_map,
    filter_unique,
    load_label_map,
    read_split_csv,
    split_counts,
    stratified_split,
    write_split_csv,
)
from .wavelets import (
    Scalogram,
    WaveletSpec,
    cwt,
    equivalent_frequencies,
    morse_wavelet_fd,
    peak_frequency,
    scale_grid,
    time_spread,
)

__all__ = [name for name in dir() if not name.startswith("_")]
