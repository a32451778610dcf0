"""Label-efficient estimation of supervised clustering metrics.

Estimates NMI/AMI/ARI between a clustering and a reference labeling from a
small, actively selected subset of reference labels.  A surrogate classifier
trained on the labeled subset pseudo-labels the rest; acquisition functions
pick which points to send to the annotator next.  The package ships the
estimation loop, a simulated-annotator benchmark harness, a pairwise
(same-cluster) annotation variant, and an HTTP service for live annotation.
"""

__version__ = "0.1.0"

from .data import (
    DataFormatError,
    EmbeddingDataset,
    HardClustering,
    LabelStore,
    SoftClustering,
    load_clustering,
    load_embeddings,
    load_labels,
    save_clustering,
    save_embeddings,
    save_labels,
)
from .datagen import BlobSpec, kmeans, make_blobs
from .metrics import METRICS, ErrorCurve, aec, ami, ari, estimate_metric, nmi
from .pipeline import (
    ACQUISITIONS,
    ESTIMATORS,
    SURROGATES,
    AnnotationError,
    Annotator,
    ExperimentConfig,
    ExperimentState,
    GroundTruthAnnotator,
    MethodSpec,
    RunResult,
    StaleLabelError,
    run_experiment,
    run_suite,
    true_metric,
)
from .rng import RngState
from .semisup import FixMatchConfig, train_fixmatch
from .surrogate import MlpModel, TrainConfig, train_supervised

__all__ = [
    "__version__",
    "ACQUISITIONS",
    "AnnotationError",
    "Annotator",
    "BlobSpec",
    "DataFormatError",
    "EmbeddingDataset",
    "ErrorCurve",
    "ESTIMATORS",
    "ExperimentConfig",
    "ExperimentState",
    "FixMatchConfig",
    "GroundTruthAnnotator",
    "HardClustering",
    "LabelStore",
    "METRICS",
    "MethodSpec",
    "MlpModel",
    "RngState",
    "RunResult",
    "SoftClustering",
    "StaleLabelError",
    "SURROGATES",
    "TrainConfig",
    "aec",
    "ami",
    "ari",
    "estimate_metric",
    "kmeans",
    "load_clustering",
    "load_embeddings",
    "load_labels",
    "make_blobs",
    "nmi",
    "run_experiment",
    "run_suite",
    "save_clustering",
    "save_embeddings",
    "save_labels",
    "train_fixmatch",
    "train_supervised",
    "true_metric",
]
