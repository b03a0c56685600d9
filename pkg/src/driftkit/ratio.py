"""Log density-ratio (Radon-Nikodym derivative) estimation by classifying origin."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import CLASSIFICATION, AugmentedDataset
from .errors import ConfigurationError, UsageError
from .model import DEFAULT_L2, PROB_CLIP, clip_probabilities, cross_entropy, fit_logistic


class FeatureView(str, enum.Enum):
    JOINT = "XY"
    X = "X"
    Y = "Y"


def one_hot(labels, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros(labels.shape + (num_classes,))
    np.put_along_axis(out, labels[..., None], 1.0, axis=-1)
    return out


def label_block(labels, task: str, num_classes: int) -> np.ndarray:
    if task == CLASSIFICATION:
        return one_hot(labels, num_classes)
    return np.asarray(labels, dtype=float)[..., None]


def project(view: FeatureView, features, labels, task: str, num_classes: int = 0,
            x_reducer: "RatioModel | None" = None) -> np.ndarray:
    """Classifier input for ``view``: X, Y (one-hot if categorical), or X then Y."""
    view = FeatureView(view)
    if view is FeatureView.Y:
        return label_block(labels, task, num_classes)
    x = np.asarray(features, dtype=float)
    if x_reducer is not None:
        x = x_reducer.target_probability(x)[:, None]
    if view is FeatureView.X:
        return x
    return np.hstack([x, label_block(labels, task, num_classes)])


@dataclass(frozen=True, eq=False)
class RatioModel:
    view: FeatureView
    classifier: object
    n_tr_1: int
    n_tr_2: int
    task: str
    num_classes: int = 0
    x_reducer: "RatioModel | None" = None

    def project(self, features, labels) -> np.ndarray:
        return project(self.view, features, labels, self.task, self.num_classes, self.x_reducer)

    def origin_proba(self, v: np.ndarray) -> np.ndarray:
        """Clipped (P(Z=1|v), P(Z=2|v)) columns for projected inputs ``v``."""
        p = clip_probabilities(np.asarray(self.classifier.predict_proba(v), dtype=float))
        classes = list(_class_ids(self.classifier))
        return p[:, [classes.index(1), classes.index(2)]]

    def target_probability(self, features) -> np.ndarray:
        if self.view is not FeatureView.X:
            raise UsageError("only an X-view model can reduce features")
        return self.origin_proba(np.asarray(features, dtype=float))[:, 1]

    def log_ratio_projected(self, v: np.ndarray) -> np.ndarray:
        p = self.origin_proba(v)
        return np.log(self.n_tr_1 / self.n_tr_2) + np.log(p[:, 1]) - np.log(p[:, 0])


def _class_ids(classifier):
    ids = getattr(classifier, "class_ids", None)
    if ids is None:
        ids = getattr(classifier, "classes_")
    return [int(c) for c in ids]


def fit_ratio(train: AugmentedDataset, view: FeatureView, l2: float = DEFAULT_L2,
              fitter: Callable | None = None, x_reducer: RatioModel | None = None) -> RatioModel:
    """Train a classifier of origin on ``view`` of the training rows.

    ``fitter(inputs, z)`` may supply any classifier exposing ``predict_proba``
    and ``class_ids`` (or scikit-learn's ``classes_``); the default is the
    built-in logistic regression.
    """
    view = FeatureView(view)
    n1, n2 = train.n1, train.n2
    if n1 < 1 or n2 < 1:
        raise ConfigurationError(f"training rows need both origins (have {n1} source, {n2} target)")
    v = project(view, train.features, train.labels, train.task, train.num_classes, x_reducer)
    if fitter is None:
        clf = fit_logistic(v, train.origin, l2=l2)
    else:
        clf = fitter(v, np.asarray(train.origin, dtype=np.int64))
    return RatioModel(view, clf, n1, n2, train.task, train.num_classes, x_reducer)


def log_ratio(model: RatioModel, features, labels=None):
    """Estimated log dP2/dP1 at one sample (vector features) or a batch."""
    x = np.asarray(features, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
        labels = None if labels is None else np.asarray([labels])
    if labels is None:
        if model.view is not FeatureView.X:
            raise UsageError(f"{model.view.value} view needs labels")
        labels = np.zeros(x.shape[0])
    v = model.project(x, labels)
    expected = _input_dim(model.classifier)
    if expected is not None and v.shape[1] != expected:
        raise UsageError(f"{model.view.value} projection has {v.shape[1]} inputs, model expects {expected}")
    out = model.log_ratio_projected(v)
    return float(out[0]) if single else out


def _input_dim(classifier):
    dim = getattr(classifier, "dim", None)
    if dim is None:
        dim = getattr(classifier, "n_features_in_", None)
    return dim


def log_ratio_bound(model: RatioModel) -> float:
    return abs(np.log(model.n_tr_1 / model.n_tr_2)) + np.log((1 - PROB_CLIP) / PROB_CLIP)


def saturation_rate(model: RatioModel, features, labels) -> float:
    """Fraction of rows whose origin probability sits on the clipping bound."""
    p = model.origin_proba(model.project(features, labels))[:, 1]
    edge = 2 * PROB_CLIP
    return float(np.mean((p <= edge) | (p >= 1 - edge)))


def validation_cross_entropy(model: RatioModel, data: AugmentedDataset) -> float:
    return cross_entropy(_Reordered(model), model.project(data.features, data.labels), data.origin)


class _Reordered:
    """Presents a ratio model's classifier with classes ordered (1, 2)."""

    class_ids = (1, 2)

    def __init__(self, model: RatioModel):
        self._model = model

    def predict_proba(self, v):
        return self._model.origin_proba(v)


def select_model(candidates, validation: AugmentedDataset):
    """Candidate ratio model with the lowest validation cross-entropy; the
    earliest candidate wins ties."""
    if not candidates:
        raise UsageError("no candidate models")
    if len(validation) == 0:
        raise ConfigurationError("empty validation set")
    losses = [validation_cross_entropy(m, validation) for m in candidates]
    return candidates[int(np.argmin(losses))]
