"""Fixed multinomial logistic-regression probe over sentence features."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ._kernels import train_fullbatch, train_numpy_minibatch
from .errors import DegenerateInput, EmptySet, NonFiniteFeature, UnknownLabel


@dataclass(frozen=True)
class ProbeHyper:
    """Training settings; defaults define the fixed probe used everywhere."""

    l2_lambda: float = 1e-4
    learning_rate: float = 0.1
    max_epochs: int = 1000
    tolerance: float = 1e-6
    seed: int = 0
    standardize: bool = True
    batch_size: int | None = None  # None = full batch (deterministic, seed-free)

    def to_dict(self) -> dict:
        return {
            "l2_lambda": self.l2_lambda,
            "learning_rate": self.learning_rate,
            "max_epochs": self.max_epochs,
            "tolerance": self.tolerance,
            "seed": self.seed,
            "standardize": self.standardize,
            "batch_size": self.batch_size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProbeHyper":
        return cls(**d)


@dataclass
class Probe:
    weights: np.ndarray  # (d, K)
    bias: np.ndarray  # (K,)
    label_order: tuple[str, ...]  # lexicographic
    hyper: ProbeHyper
    mean: np.ndarray | None = None
    std: np.ndarray | None = None
    epochs_run: int = 0
    final_loss: float = 0.0

    @property
    def dim(self) -> int:
        return int(self.weights.shape[0])

    @property
    def n_classes(self) -> int:
        return int(self.weights.shape[1])

    def _transform(self, features: np.ndarray) -> np.ndarray:
        X = np.asarray(features, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError(f"expected (n, {self.dim}) features, got {X.shape}")
        if not np.isfinite(X).all():
            raise NonFiniteFeature("non-finite value in feature matrix")
        if self.mean is not None:
            X = (X - self.mean) / self.std
        return X

    def decision_scores(self, features: np.ndarray) -> np.ndarray:
        return self._transform(features) @ self.weights + self.bias

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        scores = self.decision_scores(features)
        scores -= scores.max(axis=1, keepdims=True)
        probs = np.exp(scores)
        probs /= probs.sum(axis=1, keepdims=True)
        return probs

    def predict(self, features: np.ndarray) -> list[str]:
        # np.argmax takes the first maximum, i.e. the lowest label index on ties.
        idx = np.argmax(self.decision_scores(features), axis=1)
        return [self.label_order[i] for i in idx]

    def to_dict(self) -> dict:
        standardization = None
        if self.mean is not None:
            standardization = {
                "means": [float(v) for v in self.mean],
                "stds": [float(v) for v in self.std],
            }
        return {
            "label_order": list(self.label_order),
            "d": self.dim,
            "K": self.n_classes,
            "weights": [[float(v) for v in row] for row in self.weights],
            "bias": [float(v) for v in self.bias],
            "hyper": self.hyper.to_dict(),
            "standardization": standardization,
            "epochs_run": self.epochs_run,
            "final_loss": self.final_loss,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=1))

    @classmethod
    def from_dict(cls, d: dict) -> "Probe":
        std = d.get("standardization")
        return cls(
            weights=np.array(d["weights"], dtype=np.float64),
            bias=np.array(d["bias"], dtype=np.float64),
            label_order=tuple(d["label_order"]),
            hyper=ProbeHyper.from_dict(d["hyper"]),
            mean=None if std is None else np.array(std["means"], dtype=np.float64),
            std=None if std is None else np.array(std["stds"], dtype=np.float64),
            epochs_run=int(d.get("epochs_run", 0)),
            final_loss=float(d.get("final_loss", 0.0)),
        )

    @classmethod
    def load(cls, path) -> "Probe":
        return cls.from_dict(json.loads(Path(path).read_text()))


def train_probe(
    features: np.ndarray,
    labels: Sequence[str],
    hyper: ProbeHyper = ProbeHyper(),
    label_set: Sequence[str] | None = None,
) -> Probe:
    """Train the fixed probe; weights start at zero so runs are reproducible.

    label_set, when given, declares the full label inventory; every declared
    label must appear in the training data.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"features must be 2-d, got shape {X.shape}")
    if X.shape[0] != len(labels):
        raise ValueError(f"{X.shape[0]} rows but {len(labels)} labels")
    if not np.isfinite(X).all():
        raise NonFiniteFeature("non-finite value in training features")

    seen = set(labels)
    order = tuple(sorted(set(label_set) if label_set is not None else seen))
    missing = [l for l in order if l not in seen]
    if missing:
        raise DegenerateInput(f"declared labels never observed in training data: {missing}")
    extra = sorted(seen - set(order))
    if extra:
        raise UnknownLabel(extra[0], -1)
    if len(order) < 2:
        raise DegenerateInput(f"need at least 2 classes, got {len(order)}")
    if X.shape[0] < len(order):
        raise DegenerateInput(f"{X.shape[0]} examples cannot cover {len(order)} classes")

    mean = std = None
    if hyper.standardize:
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std = np.where(std == 0.0, 1.0, std)
        X = (X - mean) / std

    index = {label: i for i, label in enumerate(order)}
    y = np.array([index[l] for l in labels], dtype=np.int64)

    if hyper.batch_size is None:
        W, b, epochs, loss = train_fullbatch(
            X, y, len(order), hyper.l2_lambda, hyper.learning_rate, hyper.max_epochs, hyper.tolerance
        )
    else:
        W, b, epochs, loss = train_numpy_minibatch(
            X,
            y,
            len(order),
            hyper.l2_lambda,
            hyper.learning_rate,
            hyper.max_epochs,
            hyper.tolerance,
            hyper.batch_size,
            hyper.seed,
        )
    return Probe(
        weights=W,
        bias=b,
        label_order=order,
        hyper=hyper,
        mean=mean,
        std=std,
        epochs_run=epochs,
        final_loss=float(loss),
    )


def error_rate(probe: Probe, features: np.ndarray, labels: Sequence[str]) -> float:
    """Fraction of examples the probe mislabels; rejects empty inputs."""
    if len(labels) == 0:
        raise EmptySet("cannot score an empty evaluation set")
    for l in labels:
        if l not in probe.label_order:
            raise UnknownLabel(l, -1)
    predicted = probe.predict(features)
    wrong = sum(1 for p, g in zip(predicted, labels) if p != g)
    return wrong / len(labels)
