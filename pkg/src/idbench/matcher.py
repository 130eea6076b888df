"""Scikit-learn style estimator facade over the rank-one search.

``RankOneMatcher.fit(X, y)`` enrolls a gallery of embeddings with subject
labels; ``predict(X)`` returns the rank-one subject for each query row.
This wraps the same score path as :func:`idbench.search.rank_one` so the
search composes with sklearn pipelines and model-selection tooling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import SearchError


class RankOneMatcher(BaseEstimator):
    """Closed-set identification by exhaustive cosine search.

    Parameters
    ----------
    normalize : bool, default True
        Unit-normalize gallery and query rows. With pre-normalized
        embeddings this is a no-op numerically but keeps cosine = dot.
    """

    def __init__(self, normalize: bool = True):
        self.normalize = normalize

    def _prepare(self, X) -> np.ndarray:
        X = check_array(X, dtype=np.float64)
        if self.normalize:
            norms = np.linalg.norm(X, axis=1, keepdims=True)
            if np.any(norms == 0):
                raise SearchError("zero-norm row")
            X = X / norms
        return X

    def fit(self, X, y):
        X = self._prepare(X)
        y = np.asarray(y)
        if y.shape[0] != X.shape[0]:
            raise SearchError(
                f"{X.shape[0]} gallery rows vs {y.shape[0]} labels"
            )
        self.gallery_ = X
        self.labels_ = y
        self.classes_ = np.unique(y)
        return self

    def decision_scores(self, X) -> np.ndarray:
        """Float32 similarity matrix queries x gallery."""
        check_is_fitted(self, "gallery_")
        X = self._prepare(X)
        if X.shape[1] != self.gallery_.shape[1]:
            raise SearchError(
                f"query dim {X.shape[1]} vs gallery dim "
                f"{self.gallery_.shape[1]}"
            )
        return (X @ self.gallery_.T).astype(np.float32)

    def identify(self, X):
        """Best gallery row per query: (labels, scores, gallery indices)."""
        scores = self.decision_scores(X)
        idx = np.argmax(scores, axis=1)
        rows = np.arange(scores.shape[0])
        return self.labels_[idx], scores[rows, idx].astype(float), idx

    def predict(self, X) -> np.ndarray:
        labels, _, _ = self.identify(X)
        return labels

    def score(self, X, y) -> float:
        """Rank-one identification accuracy."""
        y = np.asarray(y)
        return float(np.mean(self.predict(X) == y))
