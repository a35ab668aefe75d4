"""Classifier primitives: exact KNN, binary Fisher LDA, centroid classifier.

KNN serves the base model; LDA and the centroid classifier provide the
scored binary decisions the error correctors sweep thresholds over.  All
models are immutable after fit and all predictions are deterministic:
distance ties prefer the lower reference index, vote ties prefer the class
with the smaller summed distance and then the smaller label value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import neighbors
from .errors import DimensionMismatch, EmptyModel, SingleClass


# ---------------------------------------------------------------------------
# KNN
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KnnModel:
    points: np.ndarray   # (n, d) reference points
    labels: np.ndarray   # (n,) numeric labels
    k: int


def knn_fit(X: np.ndarray, y: np.ndarray, k: int) -> KnnModel:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyModel("knn_fit needs a nonempty 2-D reference matrix")
    if len(y) != X.shape[0]:
        raise DimensionMismatch("labels must match reference count")
    if not 1 <= k <= X.shape[0]:
        raise EmptyModel(f"k={k} out of range for {X.shape[0]} reference points")
    return KnnModel(points=X, labels=y.copy(), k=k)


def _vote(labels_k: np.ndarray, dist_k: np.ndarray) -> int:
    classes, counts = np.unique(labels_k, return_counts=True)
    best = counts.max()
    tied = classes[counts == best]
    if len(tied) == 1:
        return int(tied[0])
    # nearer tied neighbor set wins: lowest summed distance, then label order
    sums = [dist_k[labels_k == c].sum() for c in tied]
    order = np.lexsort((tied, sums))
    return int(tied[order[0]])


def knn_predict(model: KnnModel, x: np.ndarray) -> int:
    return int(knn_predict_batch(model, np.atleast_2d(x))[0])


def knn_predict_batch(model: KnnModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.points.shape[1]:
        raise DimensionMismatch(
            f"model expects {model.points.shape[1]} features, got {X.shape[1]}"
        )
    dist, idx = neighbors.query_topk(model.points, X, model.k)
    labels = np.asarray(model.labels)[idx]
    return np.array(
        [_vote(labels[i], dist[i]) for i in range(X.shape[0])], dtype=np.int64
    )


def knn_regress(model: KnnModel, x: np.ndarray) -> float:
    """Mean of the K nearest labels (labels must be numeric)."""
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    _, idx = neighbors.query_topk(model.points, X, model.k)
    return float(np.asarray(model.labels, dtype=np.float64)[idx[0]].mean())


# ---------------------------------------------------------------------------
# Binary Fisher LDA
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LdaModel:
    w: np.ndarray
    bias: float
    mu0: np.ndarray
    mu1: np.ndarray
    # scatter matrices kept for diagnostics
    s_w: np.ndarray
    s_b: np.ndarray


def lda_fit(X: np.ndarray, y: np.ndarray) -> LdaModel:
    """Fisher direction w ~ S_W^-1 (mu1 - mu0), ridge-regularized.

    The score is w.x minus the projected midpoint, positive toward class 1;
    downstream use sweeps a threshold over it rather than cutting at 0.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    if set(np.unique(y)) != {0, 1}:
        raise SingleClass("lda_fit needs both classes 0 and 1 present")
    x0, x1 = X[y == 0], X[y == 1]
    mu0, mu1 = x0.mean(axis=0), x1.mean(axis=0)
    d = X.shape[1]
    s_w = (x0 - mu0).T @ (x0 - mu0) + (x1 - mu1).T @ (x1 - mu1)
    diff = mu1 - mu0
    s_b = np.outer(diff, diff)
    lam = 1e-6 * np.trace(s_w) / d
    if lam <= 0:
        lam = 1e-12
    w = np.linalg.solve(s_w + lam * np.eye(d), diff)
    bias = float(w @ (mu0 + mu1) / 2.0)
    return LdaModel(w=w, bias=bias, mu0=mu0, mu1=mu1, s_w=s_w, s_b=s_b)


def lda_score(model: LdaModel, x: np.ndarray) -> np.ndarray | float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return float(x @ model.w - model.bias)
    return x @ model.w - model.bias


# ---------------------------------------------------------------------------
# Centroid classifier
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CentroidModel:
    classes: np.ndarray    # sorted ascending (fixed label order)
    centroids: np.ndarray  # (n_classes, d)


def centroid_fit(X: np.ndarray, y: np.ndarray) -> CentroidModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyModel("centroid_fit needs a nonempty 2-D matrix")
    classes = np.unique(y)
    centroids = np.stack([X[y == c].mean(axis=0) for c in classes])
    return CentroidModel(classes=classes, centroids=centroids)


def _centroid_distances(model: CentroidModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.centroids.shape[1]:
        raise DimensionMismatch(
            f"model expects {model.centroids.shape[1]} features, got {X.shape[1]}"
        )
    diff = X[:, None, :] - model.centroids[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def centroid_predict(model: CentroidModel, x: np.ndarray) -> int:
    return int(centroid_predict_batch(model, np.atleast_2d(x))[0])


def centroid_predict_batch(model: CentroidModel, X: np.ndarray) -> np.ndarray:
    dist = _centroid_distances(model, X)
    # argmin returns the first minimum; classes are sorted, so ties follow label order
    return model.classes[np.argmin(dist, axis=1)]


def centroid_score(
    model: CentroidModel, x: np.ndarray, positive_class: int
) -> np.ndarray | float:
    """Bounded binary score d_neg / (d_neg + d_pos) in [0, 1].

    Requires a two-class model; 0.5 means equidistant (both distances zero
    included), values toward 1 mean nearer the positive centroid.
    """
    if len(model.classes) != 2:
        raise EmptyModel("centroid_score needs a two-class model")
    if positive_class not in model.classes:
        raise EmptyModel(f"class {positive_class} not in model")
    scalar = np.asarray(x).ndim == 1
    dist = _centroid_distances(model, x)
    pos_col = int(np.where(model.classes == positive_class)[0][0])
    d_pos = dist[:, pos_col]
    d_neg = dist[:, 1 - pos_col]
    total = d_pos + d_neg
    score = np.where(total > 0, d_neg / np.where(total > 0, total, 1.0), 0.5)
    return float(score[0]) if scalar else score
