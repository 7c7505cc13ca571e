"""Nearest-centre classification in SR-KDA space, and evaluation reports."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import DataError, DimensionMismatch, EmptyTestSet, MissingClass
from .srkda import KernelConfig, fit_projection, project

NO_PREDICTION = "<no-features>"


class DegenerateClassWarning(UserWarning):
    """Two classes project onto the same centroid."""


@dataclass(eq=False)
class TrainedModel:
    projection: object  # ProjectionModel
    centroids: np.ndarray
    class_names: list
    pipeline_config: dict = field(default_factory=dict)

    @property
    def n_features(self):
        return self.projection.train_signatures.shape[1]


def train_model(signatures, labels, kcfg=None, pipeline_config=None):
    """Fit SR-KDA on ``signatures`` and place one centroid per class."""
    kcfg = kcfg or KernelConfig()
    X = np.asarray(signatures, dtype=np.float64)
    labels = np.asarray(labels)
    if X.ndim != 2 or X.shape[0] != labels.shape[0]:
        raise DimensionMismatch("signatures must be an (n, d) matrix with one label per row")
    class_names, y = np.unique(labels.astype(str), return_inverse=True)
    if len(class_names) < 2:
        raise MissingClass(f"need at least two classes, got {list(class_names)}")
    sizes = np.bincount(y)
    if sizes.min() < 2:
        raise MissingClass(f"class {class_names[sizes.argmin()]!r} has fewer than 2 samples")
    proj = fit_projection(X, y, list(class_names), kcfg)
    Z = project(proj, X)
    centroids = np.stack([Z[y == k].mean(axis=0) for k in range(len(class_names))])
    scale = max(np.abs(Z).max(), 1e-300)
    for i in range(len(class_names)):
        for j in range(i + 1, len(class_names)):
            if np.linalg.norm(centroids[i] - centroids[j]) <= 1e-12 * scale:
                warnings.warn(f"classes {class_names[i]!r} and {class_names[j]!r} share a centroid",
                              DegenerateClassWarning, stacklevel=2)
    return TrainedModel(proj, centroids, list(class_names), dict(pipeline_config or {}))


def centroid_distances(model, S):
    """Euclidean distance of each projected signature to each class centroid."""
    Z = np.atleast_2d(project(model.projection, np.atleast_2d(S)))
    return np.sqrt(((Z[:, None, :] - model.centroids[None, :, :]) ** 2).sum(axis=-1))


def _nearest(names, dist_row):
    best = dist_row.min()
    return min(n for n, d in zip(names, dist_row) if d == best)


def predict(model, s):
    """Nearest-centre label and per-class distances for one signature.

    Exact distance ties go to the lexicographically smallest class name.
    """
    values = s.values if hasattr(s, "values") else s
    dist = centroid_distances(model, np.asarray(values, dtype=np.float64)[None])[0]
    return _nearest(model.class_names, dist), dist


@dataclass(eq=False)
class ConfusionMatrix:
    """Rows are true classes, columns predictions.

    ``unclassified[k]`` counts clips of class ``k`` that produced no signature;
    they count against accuracy but sit outside ``counts``.
    """

    counts: np.ndarray
    class_names: list
    unclassified: np.ndarray = None

    def __post_init__(self):
        if self.unclassified is None:
            self.unclassified = np.zeros(len(self.class_names), dtype=np.int64)

    @property
    def total(self):
        return int(self.counts.sum() + self.unclassified.sum())

    @property
    def correct(self):
        return int(np.trace(self.counts))

    @property
    def accuracy(self):
        return self.correct / self.total if self.total else 0.0

    def precision(self):
        predicted = self.counts.sum(axis=0)
        return np.divide(np.diag(self.counts), predicted,
                         out=np.zeros(len(predicted)), where=predicted > 0)

    def recall(self):
        actual = self.counts.sum(axis=1) + self.unclassified
        return np.divide(np.diag(self.counts), actual,
                         out=np.zeros(len(actual)), where=actual > 0)


@dataclass(eq=False)
class ClipResult:
    clip_id: str
    true: str
    predicted: str
    distance_margin: float


@dataclass(eq=False)
class Evaluation:
    confusion: ConfusionMatrix
    clips: list

    @property
    def accuracy(self):
        return self.confusion.accuracy


def evaluate(model, signatures, labels, clip_ids=None):
    """Classify every clip and tally a confusion matrix.

    ``signatures[i]`` may be None (or contain NaN) for a clip whose features
    could not be extracted; such clips are logged with no prediction and count
    as errors against their true class.
    """
    labels = [str(lab) for lab in labels]
    if len(labels) == 0:
        raise EmptyTestSet("nothing to evaluate")
    if len(signatures) != len(labels):
        raise DimensionMismatch("one label per signature is required")
    clip_ids = list(clip_ids) if clip_ids is not None else [str(i) for i in range(len(labels))]
    index = {name: k for k, name in enumerate(model.class_names)}
    unknown = sorted(set(labels) - set(index))
    if unknown:
        raise DataError(f"test labels {unknown} are not model classes {model.class_names}")

    c = len(model.class_names)
    counts = np.zeros((c, c), dtype=np.int64)
    unclassified = np.zeros(c, dtype=np.int64)
    ok = [s is not None and np.all(np.isfinite(np.asarray(s, dtype=float))) for s in signatures]
    dist = np.empty((len(labels), c))
    if any(ok):
        rows = np.stack([np.asarray(s, dtype=np.float64) for s, good in zip(signatures, ok) if good])
        dist[np.flatnonzero(ok)] = centroid_distances(model, rows)

    clips = []
    for i, (cid, true) in enumerate(zip(clip_ids, labels)):
        if not ok[i]:
            unclassified[index[true]] += 1
            clips.append(ClipResult(cid, true, NO_PREDICTION, float("nan")))
            continue
        pred = _nearest(model.class_names, dist[i])
        counts[index[true], index[pred]] += 1
        ordered = np.sort(dist[i])
        margin = float(ordered[1] - ordered[0]) if c > 1 else 0.0
        clips.append(ClipResult(cid, true, pred, margin))
    return Evaluation(ConfusionMatrix(counts, list(model.class_names), unclassified), clips)


def _fmt(x):
    return format(float(x), ".17g")


def format_report(ev, config=None):
    """Render an evaluation as ``key=value`` lines, a confusion table and a per-clip CSV block."""
    cm = ev.confusion
    lines = [
        "# flyact evaluation report",
        f"accuracy={_fmt(cm.accuracy)}",
        f"correct={cm.correct}",
        f"total={cm.total}",
        f"unclassified={int(cm.unclassified.sum())}",
        f"classes={','.join(cm.class_names)}",
    ]
    for name, p, r in zip(cm.class_names, cm.precision(), cm.recall()):
        lines.append(f"precision.{name}={_fmt(p)}")
        lines.append(f"recall.{name}={_fmt(r)}")
    for key, value in sorted((config or {}).items()):
        lines.append(f"config.{key}={value}")
    lines.append("")
    lines.append("[confusion]")
    lines.append("true\\predicted," + ",".join(cm.class_names) + f",{NO_PREDICTION}")
    for k, name in enumerate(cm.class_names):
        lines.append(",".join([name, *map(str, cm.counts[k]), str(cm.unclassified[k])]))
    lines.append("")
    lines.append("[clips]")
    lines.append("clip_id,true,predicted,distance_margin")
    for r in ev.clips:
        lines.append(f"{r.clip_id},{r.true},{r.predicted},{_fmt(r.distance_margin)}")
    return "\n".join(lines) + "\n"


class NearestCentreClassifier(ClassifierMixin, BaseEstimator):
    """SR-KDA projection followed by the nearest-centroid rule.

    Parameters match :class:`~flyact.srkda.KernelConfig`. After ``fit`` the
    underlying :class:`TrainedModel` is available as ``model_``.
    """

    def __init__(self, kernel="rbf", gamma=None, regularization_delta=0.01):
        self.kernel = kernel
        self.gamma = gamma
        self.regularization_delta = regularization_delta

    def fit(self, X, y):
        cfg = KernelConfig(self.kernel, self.gamma, self.regularization_delta)
        self.model_ = train_model(X, y, cfg)
        self.classes_ = np.array(self.model_.class_names)
        self.n_features_in_ = self.model_.n_features
        return self

    @classmethod
    def from_model(cls, model):
        k = model.projection.kernel
        est = cls(k.kind, k.gamma, k.regularization_delta)
        est.model_ = model
        est.classes_ = np.array(model.class_names)
        est.n_features_in_ = model.n_features
        return est

    def transform(self, X):
        check_is_fitted(self, "model_")
        return project(self.model_.projection, np.asarray(X, dtype=np.float64))

    def decision_distances(self, X):
        check_is_fitted(self, "model_")
        return centroid_distances(self.model_, np.asarray(X, dtype=np.float64))

    def predict(self, X):
        dist = self.decision_distances(X)
        return np.array([_nearest(self.model_.class_names, row) for row in dist])
