"""Concept drift detection with ensembles of integrally private models.

A stream is split into an initial training prefix and fixed-size chunks.
An ensemble of bucket-mean models, each bucket holding models trained on
disjoint subsamples that land within Delta of each other, scores every
chunk; the ensemble's predictive entropy feeds ADWIN, and only a detected
change triggers a label request and a rebuild.
"""

from .datasets import (
    CsvSchema,
    DriftSpec,
    EmptyDatasetError,
    LabeledDataset,
    StreamChunk,
    blobs,
    chunk_stream,
    gen_sine,
    load_csv,
    write_csv,
)
from .detector import Adwin, adwin_mean, adwin_new, adwin_update, adwin_width, predictive_entropy
from .ensemble import (
    Bucket,
    Ensemble,
    InsufficientDataError,
    KAnonymityReport,
    SubsampleSet,
    bucket_models,
    build_ensemble,
    derive_seed,
    generate_subsamples,
    kanonymity_report,
    max_bucket_size,
    train_on_subsamples,
)
from .metrics import (
    DriftAccounting,
    MetricsReport,
    UndefinedAUCError,
    accuracy,
    auc,
    confusion_matrix,
    drift_accounting,
    evaluate_run,
    mcc,
)
from .nn import (
    Architecture,
    ArchitectureMismatchError,
    ModelParams,
    NonFiniteLossError,
    TrainConfig,
    forward,
    init_model,
    loss_and_grads,
    mean_models,
    model_distance,
    per_example_grads,
    train,
    train_many,
)
from .stream import (
    DriftEvent,
    RetrainError,
    RunResult,
    StreamConfig,
    TrainingWindow,
    dp_noise_std,
    dp_train,
    ensemble_predict,
    run_baseline,
    run_ipdd,
    run_method,
)
from .theory import (
    BoundInputs,
    RecurrenceEstimate,
    bound_all_recurrence,
    bound_k_anonymity,
    bound_pair_recurrence,
    estimate_sigma2,
    monte_carlo_recurrence,
    recurrence_sweep,
)

__version__ = "0.1.0"
