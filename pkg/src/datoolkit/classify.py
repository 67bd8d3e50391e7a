"""Logistic regression on one-hot categorical features, from scratch.

Full-batch gradient descent on the l2-regularized log loss; deterministic
under an RNG handle (used only for the tiny random weight init).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SchemaError
from .rng import RngHandle
from .tabular import Dataset


@dataclass(frozen=True)
class HyperParams:
    learning_rate: float = 0.1
    iterations: int = 2000
    l2_penalty: float = 1e-4
    tolerance: float = 1e-6


@dataclass(frozen=True)
class ClassifierModel:
    feature_attrs: tuple[str, ...]
    label_attr: str
    positive_label: object
    weights: np.ndarray  # one weight per one-hot column
    intercept: float
    converged: bool
    iterations_run: int
    loss_history: tuple[float, ...] | None = None


def one_hot(dataset: Dataset, feature_attrs) -> np.ndarray:
    """Indicator matrix with one column per (attribute, category)."""
    schema = dataset.schema
    cols = []
    for attr in feature_attrs:
        j = schema.column_index(attr)
        size = len(schema.attributes[j][1])
        block = np.zeros((len(dataset), size))
        if len(dataset):
            block[np.arange(len(dataset)), dataset.codes[:, j]] = 1.0
        cols.append(block)
    if not cols:
        raise SchemaError("need at least one feature attribute")
    return np.hstack(cols)


def binary_labels(dataset: Dataset, label_attr: str) -> tuple[np.ndarray, object]:
    """0/1 label vector; the positive class is the last domain label."""
    schema = dataset.schema
    j = schema.column_index(label_attr)
    domain = schema.attributes[j][1]
    if len(domain) != 2:
        raise DomainError(f"label {label_attr!r} must be binary, domain has {len(domain)}")
    y = (dataset.codes[:, j] == 1).astype(float)
    return y, domain[1]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -35.0, 35.0)))


def train_logistic(
    dataset: Dataset,
    label_attr: str,
    feature_attrs,
    hyperparams: HyperParams | None = None,
    rng: RngHandle | None = None,
    track_loss: bool = False,
) -> ClassifierModel:
    """Fit the model; stops early once the gradient norm drops below tolerance.

    Training sets with a single label class produce an intercept-only model
    and a warning rather than an error.
    """
    hp = hyperparams or HyperParams()
    feature_attrs = tuple(feature_attrs)
    X = one_hot(dataset, feature_attrs)
    y, positive = binary_labels(dataset, label_attr)
    m = X.shape[0]
    rate = float(y.mean()) if m else 0.5
    if m == 0 or rate in (0.0, 1.0):
        warnings.warn(
            f"degenerate training labels (positive rate {rate}); "
            "falling back to an intercept-only model"
        )
        clipped = min(max(rate, 1e-6), 1.0 - 1e-6)
        return ClassifierModel(
            feature_attrs,
            label_attr,
            positive,
            np.zeros(X.shape[1]),
            math.log(clipped / (1.0 - clipped)),
            True,
            0,
            () if track_loss else None,
        )

    if rng is not None:
        w = rng.gen.normal(0.0, 0.01, size=X.shape[1])
    else:
        w = np.zeros(X.shape[1])
    b = 0.0
    history: list[float] = []
    converged = False
    it = 0
    for it in range(1, hp.iterations + 1):
        p = _sigmoid(X @ w + b)
        if track_loss:
            eps = 1e-12
            loss = -np.mean(
                y * np.log(p + eps) + (1.0 - y) * np.log(1.0 - p + eps)
            ) + 0.5 * hp.l2_penalty * float(w @ w)
            history.append(float(loss))
        residual = p - y
        grad_w = X.T @ residual / m + hp.l2_penalty * w
        grad_b = float(residual.mean())
        norm = math.sqrt(float(grad_w @ grad_w) + grad_b * grad_b)
        if norm < hp.tolerance:
            converged = True
            break
        w = w - hp.learning_rate * grad_w
        b = b - hp.learning_rate * grad_b
    return ClassifierModel(
        feature_attrs,
        label_attr,
        positive,
        w,
        b,
        converged,
        it,
        tuple(history) if track_loss else None,
    )


def predict_proba(model: ClassifierModel, dataset: Dataset) -> np.ndarray:
    X = one_hot(dataset, model.feature_attrs)
    return _sigmoid(X @ model.weights + model.intercept)


def accuracy(model: ClassifierModel, dataset: Dataset) -> float:
    """Fraction of records whose predicted class matches the true label."""
    if len(dataset) == 0:
        raise DomainError("cannot score an empty dataset")
    y, _ = binary_labels(dataset, model.label_attr)
    predicted = (predict_proba(model, dataset) >= 0.5).astype(float)
    return float((predicted == y).mean())
