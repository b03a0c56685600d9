"""Probabilistic classifiers: L2-penalised logistic regression fitted by Newton's
method, and the conditional label model used for conditional randomization."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import CLASSIFICATION, REGRESSION, AugmentedDataset
from .errors import FittingError, UsageError

PROB_CLIP = 1e-10
VARIANCE_FLOOR = 1e-8

DEFAULT_L2 = 1e-4
DEFAULT_MAX_ITER = 100
DEFAULT_TOL = 1e-8


def _log_softmax(s: np.ndarray) -> np.ndarray:
    m = s.max(axis=1, keepdims=True)
    shifted = s - m
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _design(features) -> np.ndarray:
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return np.hstack([np.ones((x.shape[0], 1)), x])


def clip_probabilities(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP)
    p = p / p.sum(axis=-1, keepdims=True)
    # renormalising can nudge a floor entry below the clip by ~1e-20
    return np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP)


@dataclass(frozen=True, eq=False)
class ProbabilisticClassifier:
    """Multinomial logistic model with class ``class_ids[0]`` as reference.

    ``weights`` has one row per non-reference class; column 0 is the intercept.
    For two classes this is ordinary logistic regression on ``class_ids[1]``.
    """

    weights: np.ndarray
    class_ids: tuple
    l2: float = DEFAULT_L2
    converged: bool = True
    n_iter: int = 0
    loss_history: tuple[float, ...] = ()

    @property
    def dim(self) -> int:
        return self.weights.shape[1] - 1

    @property
    def num_classes(self) -> int:
        return len(self.class_ids)

    def scores(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.dim:
            raise UsageError(f"model expects {self.dim} inputs, got {x.shape[1]}")
        s = _design(x) @ self.weights.T
        return np.hstack([np.zeros((s.shape[0], 1)), s])

    def predict_log_proba(self, features) -> np.ndarray:
        return _log_softmax(self.scores(features))

    def predict_proba(self, features) -> np.ndarray:
        """Clipped class probabilities, one column per entry of ``class_ids``."""
        return clip_probabilities(np.exp(self.predict_log_proba(features)))


def predict_proba(model, x) -> np.ndarray:
    """Probability vector for one input vector, or a matrix for a batch."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return model.predict_proba(x[None, :])[0]
    return model.predict_proba(x)


def _index_labels(labels, class_ids) -> np.ndarray:
    lookup = {c: i for i, c in enumerate(class_ids)}
    try:
        return np.fromiter((lookup[v] for v in np.asarray(labels).tolist()), dtype=np.int64)
    except KeyError as exc:
        raise UsageError(f"label {exc.args[0]!r} not among model classes {class_ids}") from None


def penalized_loss(theta: np.ndarray, xa: np.ndarray, y: np.ndarray, l2: float) -> float:
    """Mean cross-entropy plus ``l2/2 * ||w||^2`` (intercepts unpenalised).

    ``theta`` is the flattened weight matrix, ``xa`` the design with a leading
    ones column and ``y`` integer class indices.
    """
    w = theta.reshape(-1, xa.shape[1])
    s = np.hstack([np.zeros((xa.shape[0], 1)), xa @ w.T])
    logp = _log_softmax(s)[np.arange(len(y)), y]
    return float(-logp.mean() + 0.5 * l2 * np.sum(w[:, 1:] ** 2))


def _probs(w: np.ndarray, xa: np.ndarray) -> np.ndarray:
    s = np.hstack([np.zeros((xa.shape[0], 1)), xa @ w.T])
    return np.exp(_log_softmax(s))


def penalized_gradient(theta: np.ndarray, xa: np.ndarray, y: np.ndarray, l2: float) -> np.ndarray:
    w = theta.reshape(-1, xa.shape[1])
    p = _probs(w, xa)[:, 1:]
    onehot = np.zeros_like(p)
    rows = np.flatnonzero(y > 0)
    onehot[rows, y[rows] - 1] = 1.0
    g = (p - onehot).T @ xa / xa.shape[0]
    g[:, 1:] += l2 * w[:, 1:]
    return g.ravel()


def penalized_hessian(theta: np.ndarray, xa: np.ndarray, l2: float) -> np.ndarray:
    n, q = xa.shape
    w = theta.reshape(-1, q)
    m = w.shape[0]
    p = _probs(w, xa)[:, 1:]
    h = np.empty((m * q, m * q))
    for k in range(m):
        for l in range(k, m):
            c = p[:, k] * ((k == l) - p[:, l])
            block = (xa * c[:, None]).T @ xa / n
            h[k * q:(k + 1) * q, l * q:(l + 1) * q] = block
            h[l * q:(l + 1) * q, k * q:(k + 1) * q] = block.T
    penalty = np.tile(np.r_[0.0, np.full(q - 1, l2)], m)
    h[np.diag_indices_from(h)] += penalty
    return h


def fit_logistic(features, labels, l2: float = DEFAULT_L2, max_iter: int = DEFAULT_MAX_ITER,
                 tol: float = DEFAULT_TOL) -> ProbabilisticClassifier:
    """Fit by damped Newton: each step is halved until the penalised loss does
    not increase, so the recorded loss history is monotone."""
    if l2 < 0:
        raise UsageError("l2 must be non-negative")
    xa = _design(features)
    labels = np.asarray(labels)
    if labels.shape != (xa.shape[0],):
        raise UsageError("one label per feature row required")
    class_ids = tuple(np.unique(labels).tolist())
    if len(class_ids) < 2:
        raise FittingError(f"need at least two classes to fit, got {class_ids}")
    y = _index_labels(labels, class_ids)
    m, q = len(class_ids) - 1, xa.shape[1]

    theta = np.zeros(m * q)
    # start intercepts at the log class-frequency ratios
    freq = np.bincount(y, minlength=m + 1) / len(y)
    theta.reshape(m, q)[:, 0] = np.log(freq[1:] / freq[0])
    loss = penalized_loss(theta, xa, y, l2)
    history = [loss]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        grad = penalized_gradient(theta, xa, y, l2)
        if np.max(np.abs(grad)) < tol:
            converged = True
            it -= 1
            break
        hess = penalized_hessian(theta, xa, l2)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        t = 1.0
        for _ in range(60):
            cand = theta - t * step
            new_loss = penalized_loss(cand, xa, y, l2)
            if not np.isfinite(new_loss):
                raise FittingError("non-finite loss during Newton iterations")
            if new_loss <= loss:
                break
            t *= 0.5
        else:
            # no descent at machine precision: we are at the optimum numerically
            converged = np.max(np.abs(grad)) < np.sqrt(tol)
            break
        theta, loss = cand, new_loss
        history.append(loss)
    else:
        converged = np.max(np.abs(penalized_gradient(theta, xa, y, l2))) < tol
    if not np.isfinite(loss):
        raise FittingError("non-finite loss during Newton iterations")
    return ProbabilisticClassifier(theta.reshape(m, q), class_ids, l2, bool(converged), it,
                                   tuple(history))


def cross_entropy(model, features, labels) -> float:
    """Mean cross-entropy of clipped predictions against ``labels``."""
    p = model.predict_proba(np.asarray(features, dtype=float))
    y = _index_labels(labels, tuple(model.class_ids))
    return float(-np.mean(np.log(p[np.arange(len(y)), y])))


def gradient_check(features, labels, l2: float = DEFAULT_L2, theta=None, h: float = 1e-5,
                   rng=None) -> float:
    """Largest deviation between the analytic gradient of the penalised loss and
    central differences, relative to ``max(|analytic|, |numeric|, 1e-3)``.

    ``theta`` defaults to a random point drawn from ``rng``.
    """
    xa = _design(features)
    class_ids = tuple(np.unique(labels).tolist())
    y = _index_labels(labels, class_ids)
    size = (len(class_ids) - 1) * xa.shape[1]
    if theta is None:
        theta = np.random.default_rng(rng).normal(size=size)
    theta = np.asarray(theta, dtype=float).ravel()
    analytic = penalized_gradient(theta, xa, y, l2)
    numeric = np.empty_like(theta)
    for i in range(size):
        e = np.zeros_like(theta)
        e[i] = h
        numeric[i] = (penalized_loss(theta + e, xa, y, l2) - penalized_loss(theta - e, xa, y, l2)) / (2 * h)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-3)
    return float(np.max(np.abs(analytic - numeric) / scale))


# ---------------------------------------------------------------------------
# conditional label model


@dataclass(frozen=True, eq=False)
class ConditionalModel:
    """Estimate of the label distribution given features.

    ``kind == "categorical"`` wraps a classifier; ``kind == "gaussian"`` is
    ``Y | x ~ N(beta[0] + beta[1:] @ x, sigma2)``.
    """

    kind: str
    classifier: ProbabilisticClassifier | None = None
    beta: np.ndarray | None = None
    sigma2: float = 1.0
    warnings: tuple[str, ...] = field(default=())

    def mean(self, x) -> np.ndarray:
        if self.kind == "categorical":
            p = predict_proba(self.classifier, x)
            return p @ np.asarray(self.classifier.class_ids, dtype=float)
        x = np.asarray(x, dtype=float)
        return self.beta[0] + x @ self.beta[1:]


def gaussian_conditional(beta, sigma2: float) -> ConditionalModel:
    return ConditionalModel("gaussian", beta=np.asarray(beta, dtype=float),
                            sigma2=max(float(sigma2), VARIANCE_FLOOR))


def fit_conditional(train: AugmentedDataset, task: str | None = None, l2: float = DEFAULT_L2,
                    rng=None, holdout_fraction: float = 0.25) -> ConditionalModel:
    """Fit the label model on the whole (pooled) training set.

    Regression uses least squares on a random ``1 - holdout_fraction`` of the
    rows and the mean squared residual on the rest for the variance.
    """
    task = task or train.task
    if len(train) == 0:
        raise UsageError("empty training set")
    if task == CLASSIFICATION:
        clf = fit_logistic(train.features, train.labels, l2=l2)
        notes = () if clf.converged else ("conditional classifier did not converge",)
        return ConditionalModel("categorical", classifier=clf, warnings=notes)
    if task != REGRESSION:
        raise UsageError(f"unknown task {task!r}")
    n = len(train)
    if n < 2:
        raise UsageError("regression label model needs at least two training rows")
    perm = np.random.default_rng(rng).permutation(n)
    n_hold = min(max(1, int(round(holdout_fraction * n))), n - 1)
    hold, fit = perm[:n_hold], perm[n_hold:]
    x, y = train.features, np.asarray(train.labels, dtype=float)
    notes = []
    if np.all(np.ptp(x[fit], axis=0) == 0):
        notes.append("zero feature variance: label model falls back to intercept only")
        beta = np.r_[y[fit].mean(), np.zeros(x.shape[1])]
    else:
        xa = _design(x[fit])
        beta, _, rank, sv = np.linalg.lstsq(xa, y[fit], rcond=None)
        if rank < xa.shape[1] or sv[-1] <= sv[0] * 1e-10:
            notes.append("ill-conditioned design for the label model")
    resid = y[hold] - (beta[0] + x[hold] @ beta[1:])
    sigma2 = max(float(np.mean(resid ** 2)), VARIANCE_FLOOR)
    for note in notes:
        warnings.warn(note, RuntimeWarning, stacklevel=2)
    return ConditionalModel("gaussian", beta=beta, sigma2=sigma2, warnings=tuple(notes))


def sample_conditional(model: ConditionalModel, x, rng):
    """Draw labels given features: one label for a vector, an array for a matrix."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xm = x[None, :] if single else x
    if model.kind == "categorical":
        p = model.classifier.predict_proba(xm)
        cdf = np.cumsum(p, axis=1)
        u = rng.random(xm.shape[0]) * cdf[:, -1]
        idx = (cdf < u[:, None]).sum(axis=1)
        out = np.asarray(model.classifier.class_ids)[np.minimum(idx, p.shape[1] - 1)]
    else:
        out = model.beta[0] + xm @ model.beta[1:] + np.sqrt(model.sigma2) * rng.standard_normal(xm.shape[0])
    return out[0] if single else out
