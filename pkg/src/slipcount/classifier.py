"""Reference nearest-centroid classifier with calibrated confidence.

One unit-norm centroid per party, cosine scoring, softmax confidence with
a sharp temperature (default 0.05). Deterministic, dependency-free, and
fast enough to clear the 40 ms/slip budget by orders of magnitude.

A heavier CNN backend can be slotted in behind the same predict contract;
:class:`ExternalModelSpec` carries the metadata for such a backend (batch
size 32, 15 epochs, 80-20 split, ReLU head) but is never executed here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import LabeledDataset
from .errors import EmptyModel, EmptyTrainingSet, UnknownLabel
from .features import FEATURE_DIM, preprocess

DEFAULT_TEMPERATURE = 0.05
MODEL_FORMAT = "slipcount-model"
MODEL_FORMAT_VERSION = 1
TOP_K = 5


@dataclass(frozen=True)
class Prediction:
    party_id: str
    confidence: float  # in [0, 1]
    margin: float  # top-1 minus top-2 cosine, >= 0
    top_k: list[tuple[str, float]]  # ranked (party_id, similarity)


@dataclass
class Metrics:
    classes: list[str]
    confusion: np.ndarray  # rows = true class, cols = predicted
    accuracy: float
    per_class_recall: dict[str, float]


@dataclass(frozen=True)
class ExternalModelSpec:
    """Metadata describing a pluggable deep-learning backend (never run here)."""

    backbone_name: str
    weights_path: str
    batch_size: int = 32
    epochs: int = 15
    train_fraction: float = 0.8
    activation: str = "relu"


@dataclass
class Model:
    centroids: dict[str, np.ndarray]  # party_id -> unit-norm feature
    feature_dim: int = FEATURE_DIM
    softmax_temperature: float = DEFAULT_TEMPERATURE
    created_from: str = ""

    @property
    def classes(self) -> list[str]:
        return sorted(self.centroids)


def fit(
    train: LabeledDataset,
    softmax_temperature: float = DEFAULT_TEMPERATURE,
) -> Model:
    """One centroid per label: the L2-normalised mean of its features."""
    if len(train) == 0:
        raise EmptyTrainingSet("training set is empty")
    sums: dict[str, np.ndarray] = {}
    counts: dict[str, int] = {}
    for it in train.items:
        f = preprocess(it.image)
        if it.label in sums:
            sums[it.label] += f
            counts[it.label] += 1
        else:
            sums[it.label] = f.copy()
            counts[it.label] = 1
    centroids: dict[str, np.ndarray] = {}
    for label, s in sums.items():
        mean = s / counts[label]
        norm = float(np.linalg.norm(mean))
        centroids[label] = mean / norm if norm > 0 else mean
    return Model(
        centroids=centroids,
        softmax_temperature=softmax_temperature,
        created_from=train.digest(),
    )


def predict(model: Model, image: np.ndarray) -> Prediction:
    """Label a slip image with confidence, margin, and ranked candidates.

    Confidence is the top softmax probability of cosine similarities at the
    model's temperature. A uniform (zero-feature) slip scores identically
    against every class and comes back with confidence 1/len(classes) so it
    flows into the review queue instead of crashing the count.
    """
    if not model.centroids:
        raise EmptyModel("model holds no classes")
    feature = preprocess(image)
    classes = model.classes
    sims = np.array([float(np.dot(feature, model.centroids[c])) for c in classes])
    order = np.argsort(-sims, kind="stable")  # ties broken by lowest party_id
    ranked = [(classes[i], float(sims[i])) for i in order]
    logits = sims / model.softmax_temperature
    logits -= logits.max()
    probs = np.exp(logits)
    probs /= probs.sum()
    top = int(order[0])
    margin = ranked[0][1] - ranked[1][1] if len(ranked) > 1 else ranked[0][1]
    return Prediction(
        party_id=classes[top],
        confidence=float(probs[top]),
        margin=float(max(margin, 0.0)),
        top_k=ranked[:TOP_K],
    )


def evaluate(model: Model, test: LabeledDataset) -> Metrics:
    """Confusion matrix, accuracy, and per-class recall over a test set."""
    if len(test) == 0:
        raise EmptyTrainingSet("test set is empty")
    classes = model.classes
    index = {c: i for i, c in enumerate(classes)}
    for it in test.items:
        if it.label not in index:
            raise UnknownLabel(f"test label {it.label!r} absent from model")
    confusion = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for it in test.items:
        pred = predict(model, it.image)
        confusion[index[it.label], index[pred.party_id]] += 1
    total = int(confusion.sum())
    accuracy = float(np.trace(confusion)) / total
    recall: dict[str, float] = {}
    for c, i in index.items():
        row = int(confusion[i].sum())
        if row > 0:
            recall[c] = float(confusion[i, i]) / row
    return Metrics(classes=classes, confusion=confusion, accuracy=accuracy, per_class_recall=recall)


def low_recall_classes(metrics: Metrics, recall_threshold: float = 0.80) -> list[str]:
    """Classes whose recall falls strictly below the threshold, worst first."""
    if not 0.0 <= recall_threshold <= 1.0:
        raise ValueError(f"recall_threshold must be in [0, 1], got {recall_threshold}")
    flagged = [
        (r, c) for c, r in metrics.per_class_recall.items() if r < recall_threshold
    ]
    flagged.sort()
    return [c for _, c in flagged]


# persistence ----------------------------------------------------------------


def save_model(model: Model, path: str | Path) -> None:
    """Write the versioned JSON model container (stable layout, diffable)."""
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "feature_dim": model.feature_dim,
        "softmax_temperature": model.softmax_temperature,
        "created_from": model.created_from,
        "centroids": {c: model.centroids[c].tolist() for c in model.classes},
    }
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(doc, indent=1), encoding="utf-8")


def load_model(path: str | Path) -> Model:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"not a {MODEL_FORMAT} file: {path}")
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')}")
    centroids = {c: np.asarray(v, dtype=np.float64) for c, v in doc["centroids"].items()}
    return Model(
        centroids=centroids,
        feature_dim=int(doc["feature_dim"]),
        softmax_temperature=float(doc["softmax_temperature"]),
        created_from=str(doc.get("created_from", "")),
    )


def metrics_report(metrics: Metrics, recall_threshold: float = 0.80) -> dict:
    """JSON-ready metrics document: accuracy, recall table, confusion, flags."""
    return {
        "accuracy": metrics.accuracy,
        "classes": metrics.classes,
        "per_class_recall": {c: metrics.per_class_recall[c] for c in sorted(metrics.per_class_recall)},
        "confusion": metrics.confusion.tolist(),
        "low_recall_threshold": recall_threshold,
        "low_recall_classes": low_recall_classes(metrics, recall_threshold),
    }
