"""Active-sampling evaluation loop.

The loop labels a uniform seed batch, then alternates: retrain the surrogate
from scratch on everything labeled so far, pseudo-label the rest, record a
metric estimate, and pick the next query batch with the configured
acquisition function.  ExperimentState exposes the loop one submission at a
time so the same machine can be driven by a simulated annotator (CLI) or by
humans over HTTP.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence

import numpy as np

from .acquisition import ACQUISITIONS, AcquisitionContext, score_candidates, select
from .data import Clustering, EmbeddingDataset, LabelStore, SoftClustering
from .metrics import METRICS, ErrorCurve, aec, build_contingency, estimate_metric
from .rng import RngState
from .semisup import FixMatchConfig, train_fixmatch
from .surrogate import TrainConfig, train_supervised

ESTIMATORS = ("labeled_only", "imputed")
SURROGATES = ("supervised", "fixmatch")

# Root rng children for the run's decision points.  Training, scoring, and
# selection each get a per-round substream so a resumed session replays the
# identical randomness without serializing any generator state.
_STREAM_SEED_SAMPLE = 0
_STREAM_TRAIN = 1
_STREAM_SCORE = 2
_STREAM_SELECT = 3


class AnnotationError(RuntimeError):
    """An annotator failed; carries the round it failed in."""


class StaleLabelError(ValueError):
    """A label arrived for an id that is not awaiting one."""


@dataclass
class ExperimentConfig:
    """Run parameters; nested configs cover the two training paths."""

    k_ref: int
    metric: str = "nmi"
    acquisition: str = "random"
    surrogate: str = "supervised"
    estimator: str = "labeled_only"
    pseudo_label: bool = False
    seed_size: int = 50
    queries_per_round: int = 50
    budget: int = 1000
    seed: int = 0
    bald_passes: int = 10
    hidden_dim: int = 128
    hidden_layers: int = 4
    dropout_rate: float = 0.2
    train: TrainConfig = field(default_factory=TrainConfig)
    fixmatch: FixMatchConfig = field(default_factory=FixMatchConfig)

    def __post_init__(self) -> None:
        if self.k_ref < 1:
            raise ValueError("k_ref must be >= 1")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.acquisition not in ACQUISITIONS:
            raise ValueError(f"unknown acquisition {self.acquisition!r}")
        if self.surrogate not in SURROGATES:
            raise ValueError(f"unknown surrogate mode {self.surrogate!r}")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator mode {self.estimator!r}")
        if self.seed_size < 1 or self.queries_per_round < 1:
            raise ValueError("seed_size and queries_per_round must be positive")
        if self.budget < self.seed_size:
            raise ValueError("budget must be at least seed_size")
        if self.bald_passes < 1:
            raise ValueError("bald_passes must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ExperimentConfig":
        data = dict(raw)
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config field(s): {sorted(unknown)}")
        if "train" in data and isinstance(data["train"], Mapping):
            data["train"] = TrainConfig(**data["train"])
        if "fixmatch" in data and isinstance(data["fixmatch"], Mapping):
            data["fixmatch"] = FixMatchConfig(**data["fixmatch"])
        return cls(**data)


class Annotator(Protocol):
    """Answers label queries; must be deterministic per id within a run."""

    def label(self, point_id: str) -> int: ...

    def same_cluster(self, first: str, second: str) -> bool: ...


class GroundTruthAnnotator:
    """Simulated annotator that reads a fixed truth mapping."""

    def __init__(self, truth: Mapping[str, int]):
        self._truth = dict(truth)

    def label(self, point_id: str) -> int:
        return self._truth[point_id]

    def same_cluster(self, first: str, second: str) -> bool:
        return self._truth[first] == self._truth[second]


class Predictor(Protocol):
    def predict_proba(self, x: np.ndarray) -> np.ndarray: ...


TrainerFn = Callable[[EmbeddingDataset, Mapping[str, int], "ExperimentConfig", RngState], Predictor]


def _default_trainer(
    dataset: EmbeddingDataset,
    human: Mapping[str, int],
    cfg: ExperimentConfig,
    rng: RngState,
) -> Predictor:
    labeled_ids = [i for i in dataset.ids if i in human]
    x_l = dataset.vectors_for(labeled_ids)
    y_l = np.array([human[i] for i in labeled_ids], dtype=np.int64)
    arch = dict(
        hidden_dim=cfg.hidden_dim,
        hidden_layers=cfg.hidden_layers,
        dropout_rate=cfg.dropout_rate,
    )
    if cfg.surrogate == "fixmatch":
        unlabeled_ids = [i for i in dataset.ids if i not in human]
        x_u = dataset.vectors_for(unlabeled_ids) if unlabeled_ids else np.empty((0, dataset.dim))
        return train_fixmatch(rng, x_l, y_l, x_u, cfg.k_ref, cfg.fixmatch, **arch)
    return train_supervised(rng, x_l, y_l, cfg.k_ref, cfg.train, **arch)


def pseudo_label(model: Predictor, unlabeled_ids: Sequence[str], dataset: EmbeddingDataset) -> dict[str, int]:
    """Argmax predictions for the given ids; ties go to the lowest index."""
    if not unlabeled_ids:
        return {}
    probs = model.predict_proba(dataset.vectors_for(unlabeled_ids))
    picks = np.argmax(probs, axis=1)
    return {pid: int(c) for pid, c in zip(unlabeled_ids, picks)}


class ExperimentState:
    """The evaluation loop, advanced one completed label batch at a time.

    Labels may arrive in partial submissions; the round advances (train,
    pseudo-label, estimate, pick the next batch) only once every pending id
    has a label.  A point is never queried twice, and all randomness derives
    from the config seed plus the round index, so identical label sequences
    replay identical runs, including across process restarts.
    """

    def __init__(
        self,
        dataset: EmbeddingDataset,
        test: Clustering,
        cfg: ExperimentConfig,
        trainer: TrainerFn | None = None,
    ):
        if cfg.budget > dataset.n:
            raise ValueError(f"budget {cfg.budget} exceeds dataset size {dataset.n}")
        test_ids = test.rows.keys() if isinstance(test, SoftClustering) else test.assignment.keys()
        if set(test_ids) != set(dataset.ids):
            raise ValueError("test clustering must cover exactly the dataset ids")
        self.dataset = dataset
        self.test = test
        self.cfg = cfg
        self._trainer = trainer or _default_trainer
        self._root = RngState(cfg.seed)
        self.human: dict[str, int] = {}
        self.pseudo: dict[str, int] = {}
        self.round = 0
        self.status = "awaiting_labels"
        self.curve_points: list[tuple[int, float]] = []
        self.audit: list[dict] = []
        self.staged: dict[str, int] = {}
        uniform = {i: 0.0 for i in dataset.ids}
        self.pending: list[str] = select(uniform, cfg.seed_size, self._root.child(_STREAM_SEED_SAMPLE))
        self._pending_scores: dict[str, float] | None = None  # None for the uniform seed batch

    @property
    def labels_used(self) -> int:
        return len(self.human)

    @property
    def estimate(self) -> float | None:
        return self.curve_points[-1][1] if self.curve_points else None

    def store(self) -> LabelStore:
        return LabelStore(self.human, self.pseudo, self.cfg.k_ref)

    def submit_labels(self, labels: Mapping[str, int]) -> None:
        """Stage labels for pending ids; advances the round when complete.

        Rejects labels for ids that are not awaiting one (including ids
        already labeled this round), so each (round, id) is applied at most
        once.  The whole submission is validated before any of it applies.
        """
        if self.status == "done":
            raise StaleLabelError("session is complete; no labels are pending")
        pending = set(self.pending)
        for pid, label in labels.items():
            if pid not in pending or pid in self.staged:
                raise StaleLabelError(f"id {pid!r} is not awaiting a label")
            if not isinstance(label, (int, np.integer)) or isinstance(label, bool):
                raise ValueError(f"label for id {pid!r} must be an integer")
            if not 0 <= label < self.cfg.k_ref:
                raise ValueError(f"label {label} for id {pid!r} outside [0, {self.cfg.k_ref})")
        self.staged.update({pid: int(v) for pid, v in labels.items()})
        if len(self.staged) == len(self.pending):
            self._advance()

    def _advance(self) -> None:
        self.status = "training"
        self.human.update(self.staged)
        queried = list(self.pending)
        self.staged = {}
        self.pending = []
        r = self.round

        model = self._trainer(self.dataset, self.human, self.cfg, self._root.child(_STREAM_TRAIN).child(r))
        unlabeled = [i for i in self.dataset.ids if i not in self.human]
        self.pseudo = pseudo_label(model, unlabeled, self.dataset) if self.cfg.pseudo_label else {}
        est_pseudo = self.pseudo if self.cfg.estimator == "imputed" else {}
        estimate = estimate_metric(
            self.cfg.metric, self.test, LabelStore(self.human, est_pseudo, self.cfg.k_ref)
        )
        self.curve_points.append((len(self.human), estimate))
        self.audit.append(
            {
                "round": r,
                "labels_used": len(self.human),
                "queried": queried,
                "scores": self._pending_scores,
                "estimate": estimate,
            }
        )

        if len(self.human) >= self.cfg.budget:
            self.status = "done"
            self._pending_scores = None
            return
        hard = self.test.harden() if isinstance(self.test, SoftClustering) else self.test
        stats = build_contingency(hard, self.human, self.cfg.k_ref)
        ctx = AcquisitionContext(model, self.test, stats, tuple(unlabeled), self.dataset)
        scores = score_candidates(
            ctx, self.cfg.acquisition, rng=self._root.child(_STREAM_SCORE).child(r), passes=self.cfg.bald_passes
        )
        take = min(self.cfg.queries_per_round, self.cfg.budget - len(self.human))
        self.pending = select(scores, take, self._root.child(_STREAM_SELECT).child(r))
        self._pending_scores = {i: scores[i] for i in self.pending}
        self.round += 1
        self.status = "awaiting_labels"


@dataclass(frozen=True)
class RunResult:
    curve: ErrorCurve
    final_estimate: float
    audit: tuple[dict, ...]


def true_metric(metric: str, test: Clustering, truth: Mapping[str, int], k_ref: int) -> float:
    """Exact metric against a full reference labeling."""
    return estimate_metric(metric, test, LabelStore(dict(truth), {}, k_ref))


def run_experiment(
    dataset: EmbeddingDataset,
    test: Clustering,
    annotator: Annotator,
    cfg: ExperimentConfig,
    truth: Mapping[str, int] | None = None,
    trainer: TrainerFn | None = None,
) -> RunResult:
    """Drive the loop to completion with the given annotator.

    The curve has one point per completed round, the seed round included.
    When ``truth`` is given the curve carries the exact metric value so the
    estimate error can be integrated later.
    """
    state = ExperimentState(dataset, test, cfg, trainer)
    while state.status != "done":
        batch: dict[str, int] = {}
        for pid in state.pending:
            try:
                batch[pid] = annotator.label(pid)
            except Exception as exc:
                raise AnnotationError(f"annotator failed on id {pid!r} in round {state.round}: {exc}") from exc
        state.submit_labels(batch)
    tv = true_metric(cfg.metric, test, truth, cfg.k_ref) if truth is not None else None
    curve = ErrorCurve(tuple(state.curve_points), tv)
    return RunResult(curve, state.curve_points[-1][1], tuple(state.audit))


@dataclass(frozen=True)
class MethodSpec:
    """One benchmark arm: a named combination of the pipeline toggles."""

    name: str
    acquisition: str = "random"
    surrogate: str = "supervised"
    estimator: str = "labeled_only"
    pseudo_label: bool = False


@dataclass(frozen=True)
class SuiteRow:
    method: str
    mean_aec: float
    std_err: float
    runs: int
    aecs: tuple[float, ...]


def run_suite(
    dataset: EmbeddingDataset,
    tests: Sequence[Clustering],
    methods: Sequence[MethodSpec],
    seeds: Sequence[int],
    truth: Mapping[str, int],
    base_cfg: ExperimentConfig,
    progress: Callable[[str], None] | None = None,
) -> list[SuiteRow]:
    """Run every (method, test clustering, seed) cell and aggregate AEC.

    Seeds are shared across methods so comparisons are paired.  The standard
    error is the sample standard deviation over the pooled runs divided by
    sqrt(runs).
    """
    if not tests or not methods or not seeds:
        raise ValueError("tests, methods, and seeds must be nonempty")
    rows = []
    for method in methods:
        aecs: list[float] = []
        for t_idx, test in enumerate(tests):
            for seed in seeds:
                cfg = replace(
                    base_cfg,
                    acquisition=method.acquisition,
                    surrogate=method.surrogate,
                    estimator=method.estimator,
                    pseudo_label=method.pseudo_label,
                    seed=seed,
                )
                result = run_experiment(dataset, test, GroundTruthAnnotator(truth), cfg, truth=truth)
                aecs.append(aec(result.curve))
                if progress is not None:
                    progress(f"{method.name} clustering={t_idx} seed={seed} aec={aecs[-1]:.4f}")
        arr = np.array(aecs)
        std_err = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
        rows.append(SuiteRow(method.name, float(arr.mean()), std_err, len(arr), tuple(aecs)))
    return rows


def curve_to_csv(curve: ErrorCurve, path: str | Path) -> None:
    """Write labels_used, estimate, and (when truth is known) error columns."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if curve.true_value is None:
            writer.writerow(["labels_used", "estimate"])
            for x, v in curve.points:
                writer.writerow([x, repr(v)])
        else:
            writer.writerow(["labels_used", "estimate", "true_value", "abs_error"])
            for x, v in curve.points:
                writer.writerow([x, repr(v), repr(curve.true_value), repr(abs(v - curve.true_value))])


def suite_to_csv(rows: Iterable[SuiteRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "mean_aec", "std_err", "runs"])
        for row in rows:
            writer.writerow([row.method, repr(row.mean_aec), repr(row.std_err), row.runs])
