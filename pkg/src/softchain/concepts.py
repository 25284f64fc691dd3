"""Fitting the parameters of neural predicates from labelled concept examples."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .valuation import PARAM_SIZES, ValuationError, get_layout, neural_features, valuate

FEATURE_SCALE = 4.0
ARITY = {"closeby": 2, "online": 5, "leftside": 1, "rightside": 1, "front": 2}


def _split_args(X, arity: int):
    return [X[:, k, :] for k in range(arity)]


def _check_examples(X, y, valuation: str, layout):
    if valuation not in PARAM_SIZES:
        raise ValuationError(f"{valuation!r} is not a parameterized neural predicate")
    arity = ARITY[valuation]
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X.reshape(X.shape[0], arity, -1)
    if X.ndim != 3 or X.shape[1] != arity or X.shape[2] != layout.dim:
        raise ValuationError(f"{valuation} examples must be n x {arity} x {layout.dim}, got {X.shape}")
    if y is None:
        return X, None
    y = np.asarray(y, dtype=np.float64).ravel()
    if len(y) != len(X):
        raise ValuationError("examples and labels differ in length")
    return X, y


def fit_concept(valuation: str, X, y, layout="kandinsky11", learning_rate: float = 0.1,
                n_iter: int = 2000, seed: int = 0) -> np.ndarray:
    """Fit ``[w..., b]`` of a neural predicate by full-batch gradient descent.

    Minimizes the mean binary cross-entropy between the predicate's valuation
    and the labels. Descent runs on standardized features scaled by
    ``FEATURE_SCALE`` (which speeds up the fixed schedule without leaving the
    stable step range) and the result is mapped back to raw feature units.
    """
    layout = get_layout(layout)
    X, y = _check_examples(X, y, valuation, layout)
    if len(y) < 2 or len(np.unique(y)) < 2:
        raise ValuationError("concept examples need both positive and negative labels")

    feats, gate = neural_features(valuation, _split_args(X, ARITY[valuation]), layout)
    feats = np.asarray(feats)
    gate = np.ones(len(y)) if gate is None else np.asarray(gate)
    mu = feats.mean(axis=0)
    sd = feats.std(axis=0)
    sd[sd < 1e-12] = 1.0
    # standardized and scaled design, bias column included; a fixed preconditioner for the short schedule
    Fs = (feats - mu) / sd * FEATURE_SCALE

    rng = np.random.default_rng(seed)
    w = rng.normal(scale=0.01, size=Fs.shape[1])
    b = 0.0
    n = len(y)
    eps = 1e-12
    for _ in range(n_iter):
        s = 1.0 / (1.0 + np.exp(-(Fs @ w + b * FEATURE_SCALE)))
        p = np.clip(s * gate, eps, 1 - eps)
        # d BCE / dz for p = gate * sigmoid(z)
        g = (p - y) * gate * s * (1 - s) / (p * (1 - p))
        w -= learning_rate * (Fs.T @ g) / n
        b -= learning_rate * FEATURE_SCALE * g.sum() / n

    w_raw = w * FEATURE_SCALE / sd
    b_raw = b * FEATURE_SCALE - float(np.sum(mu * w_raw))
    return np.concatenate([w_raw, [b_raw]])


class ConceptClassifier(ClassifierMixin, BaseEstimator):
    """Scikit-learn wrapper around one parameterized neural predicate.

    ``X`` holds object rows shaped ``n x arity x D`` (or flattened to
    ``n x arity*D``); ``y`` is 0/1.
    """

    def __init__(self, valuation="closeby", layout="kandinsky11", learning_rate=0.1,
                 n_iter=2000, random_state=0):
        self.valuation = valuation
        self.layout = layout
        self.learning_rate = learning_rate
        self.n_iter = n_iter
        self.random_state = random_state

    def fit(self, X, y):
        self.params_ = fit_concept(self.valuation, X, y, self.layout, self.learning_rate,
                                   self.n_iter, self.random_state)
        self.coef_ = self.params_[:-1]
        self.intercept_ = self.params_[-1]
        self.classes_ = np.array([0, 1])
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        layout = get_layout(self.layout)
        X, _ = _check_examples(X, None, self.valuation, layout)
        p = np.asarray(valuate(self.valuation, _split_args(X, ARITY[self.valuation]),
                               {self.valuation: self.params_}, layout))
        return np.column_stack([1 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)
