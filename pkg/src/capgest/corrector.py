"""Adaptive error correction: group discovery, zero-FP thresholds, cascade.

Errors of the frozen base model are bucketed into (truth, prediction)
groups.  Each group gets a binary classifier over high-dimensional kernel
features whose decision threshold is chosen so it never fires on a sample
the base model got right, on both the training and holdout sweeps.  At
inference a group classifier routes suspicious samples to their corrector.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .classify import (
    CentroidModel,
    LdaModel,
    centroid_fit,
    centroid_score,
    knn_predict_batch,
    lda_fit,
    lda_score,
)
from .embed import FittedKernel, kernel_apply, pca_transform
from .errors import EmptyCandidateSet, NoPositives, SingleClass, TooFewGroups
from .signals import GestureLabel

N_LABELS = len(GestureLabel)


@dataclass(frozen=True)
class ErrorGroup:
    """An ordered (ground truth, base prediction) confusion pattern."""

    truth: GestureLabel
    predicted: GestureLabel

    def __post_init__(self) -> None:
        if self.truth == self.predicted:
            raise ValueError("an error group needs truth != predicted")

    @property
    def group_id(self) -> int:
        return N_LABELS * int(self.truth) + int(self.predicted)

    @classmethod
    def from_id(cls, group_id: int) -> "ErrorGroup":
        return cls(GestureLabel(group_id // N_LABELS), GestureLabel(group_id % N_LABELS))

    def describe(self) -> str:
        return f"{self.truth.text}->{self.predicted.text}"


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    tp_count: int
    fp_count: int


def discover_groups(
    truths: np.ndarray, base_preds: np.ndarray, min_support: int = 10
) -> list[ErrorGroup]:
    """All confusion patterns with at least ``min_support`` occurrences."""
    truths = np.asarray(truths)
    base_preds = np.asarray(base_preds)
    if len(truths) != len(base_preds):
        raise ValueError("truths and base_preds must have equal length")
    counts = Counter(
        (int(t), int(p)) for t, p in zip(truths, base_preds) if t != p
    )
    groups = [
        ErrorGroup(GestureLabel(t), GestureLabel(p))
        for (t, p), c in counts.items()
        if c >= min_support
    ]
    return sorted(groups, key=lambda g: g.group_id)


def label_group_binary(
    truths: np.ndarray, base_preds: np.ndarray, group: ErrorGroup
) -> tuple[np.ndarray, np.ndarray]:
    """Candidate mask and binary labels for one error group.

    Candidates are samples the base model assigned the group's predicted
    label; a candidate is positive iff its ground truth is the group's truth.
    """
    truths = np.asarray(truths)
    base_preds = np.asarray(base_preds)
    mask = base_preds == int(group.predicted)
    if not np.any(mask):
        raise EmptyCandidateSet(f"group {group.describe()} has no candidates")
    labels = (truths[mask] == int(group.truth)).astype(np.int64)
    return mask, labels


def roc_counts(scores: np.ndarray, labels: np.ndarray) -> list[RocPoint]:
    """TP/FP counts at every distinct score, predicting positive at >= threshold."""
    labels = np.asarray(labels).astype(np.int64)
    if int(labels.sum()) < 1:
        raise NoPositives("roc_counts needs at least one positive sample")
    return _roc_counts_unchecked(scores, labels)


def _roc_counts_unchecked(scores: np.ndarray, labels: np.ndarray) -> list[RocPoint]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(np.int64)
    if len(scores) != len(labels):
        raise ValueError("scores and labels must have equal length")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    pos = np.cumsum(labels[order] == 1)
    neg = np.cumsum(labels[order] == 0)
    # last occurrence of each distinct score carries the cumulative counts
    last = np.nonzero(np.diff(np.append(s, -np.inf)) != 0)[0]
    return [RocPoint(float(s[i]), int(pos[i]), int(neg[i])) for i in last]


def select_threshold_zero_fp(
    train_roc: Sequence[RocPoint], holdout_roc: Sequence[RocPoint]
) -> float | None:
    """Threshold maximizing train TP with zero FP on BOTH sweeps, if any."""

    def fp_at(roc: Sequence[RocPoint], threshold: float) -> int:
        worst = 0
        for point in roc:
            if point.threshold >= threshold:
                worst = max(worst, point.fp_count)
        return worst

    best: float | None = None
    best_tp = 0
    for point in train_roc:
        if point.fp_count == 0 and point.tp_count >= 1:
            if fp_at(holdout_roc, point.threshold) == 0 and point.tp_count > best_tp:
                best = point.threshold
                best_tp = point.tp_count
    return best


# ---------------------------------------------------------------------------
# Group classifier
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroupClassifier:
    """Routes misclassified-looking samples to an error group.

    Centroid-based by default; a one-vs-rest LDA variant is available since
    multi-class outputs are needed but binary LDA is the primitive.
    """

    kernel: FittedKernel
    kind: str                       # "centroid" | "lda_ovr"
    group_ids: tuple[int, ...]
    centroid: CentroidModel | None = None
    lda_models: tuple[tuple[int, LdaModel], ...] = ()

    def assign(self, features: np.ndarray, allowed_ids: Sequence[int]) -> int | None:
        """Pick a group among ``allowed_ids`` for one kernel-feature row."""
        allowed = [g for g in allowed_ids if g in self.group_ids]
        if not allowed:
            return None
        if len(allowed) == 1:
            return allowed[0]
        features = np.atleast_2d(features)
        if self.kind == "centroid":
            cols = [int(np.where(self.centroid.classes == g)[0][0]) for g in allowed]
            diff = features[:, None, :] - self.centroid.centroids[cols][None, :, :]
            dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))[0]
            return allowed[int(np.argmin(dist))]
        scores = [lda_score(m, features[0]) for g, m in self.lda_models if g in allowed]
        ids = [g for g, _ in self.lda_models if g in allowed]
        return ids[int(np.argmax(scores))]


def train_group_classifier(
    error_features: np.ndarray,
    group_ids: np.ndarray,
    kernel: FittedKernel,
    kind: str = "centroid",
    min_support: int = 10,
) -> GroupClassifier:
    """Fit the multiclass router on misclassified training samples.

    ``error_features`` are raw (100-feature) vectors of training errors;
    ``group_ids`` their true group ids.  Groups under ``min_support`` are
    ignored.  Raises TooFewGroups when fewer than two remain, in which case
    the cascade falls back to gating by base prediction alone.
    """
    group_ids = np.asarray(group_ids).astype(np.int64)
    counts = Counter(group_ids.tolist())
    active = sorted(g for g, c in counts.items() if c >= min_support)
    if len(active) < 2:
        raise TooFewGroups(f"need >= 2 groups with support {min_support}, got {active}")
    keep = np.isin(group_ids, active)
    feats = kernel_apply(kernel, np.asarray(error_features)[keep])
    labels = group_ids[keep]
    if kind == "centroid":
        return GroupClassifier(
            kernel=kernel,
            kind=kind,
            group_ids=tuple(active),
            centroid=centroid_fit(feats, labels),
        )
    if kind == "lda_ovr":
        models = []
        for g in active:
            try:
                models.append((g, lda_fit(feats, (labels == g).astype(np.int64))))
            except SingleClass:
                continue
        return GroupClassifier(
            kernel=kernel, kind=kind, group_ids=tuple(active), lda_models=tuple(models)
        )
    raise ValueError(f"unknown group classifier kind {kind!r}")


# ---------------------------------------------------------------------------
# Per-group correctors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Corrector:
    group: ErrorGroup
    kernel_name: str
    classifier_kind: str            # "centroid" | "lda"
    centroid: CentroidModel | None
    lda: LdaModel | None
    threshold: float
    enabled: bool
    train_tp: int
    train_positives: int
    holdout_tp: int
    holdout_positives: int

    def score(self, kernel_features: np.ndarray) -> np.ndarray:
        kernel_features = np.atleast_2d(kernel_features)
        if self.classifier_kind == "centroid":
            return np.atleast_1d(centroid_score(self.centroid, kernel_features, 1))
        return np.atleast_1d(lda_score(self.lda, kernel_features))


def _fit_and_score(kind, feats_train, y_train, feats_holdout):
    if kind == "centroid":
        model = centroid_fit(feats_train, y_train)
        if len(model.classes) != 2:
            raise SingleClass("both binary classes required")
        return model, None, np.asarray(centroid_score(model, feats_train, 1)), np.asarray(
            centroid_score(model, feats_holdout, 1)
        ) if len(feats_holdout) else np.empty(0)
    model = lda_fit(feats_train, y_train)
    return None, model, np.asarray(lda_score(model, feats_train)), (
        np.asarray(lda_score(model, feats_holdout)) if len(feats_holdout) else np.empty(0)
    )


def train_corrector(
    group: ErrorGroup,
    kernels: Mapping[str, FittedKernel],
    train_kernel_features: Mapping[str, np.ndarray],
    holdout_kernel_features: Mapping[str, np.ndarray],
    train_truths: np.ndarray,
    train_preds: np.ndarray,
    holdout_truths: np.ndarray,
    holdout_preds: np.ndarray,
    classifier_kinds: Sequence[str] = ("centroid", "lda"),
) -> Corrector | None:
    """Grid-search kernels x classifiers for the best zero-FP corrector.

    Returns the combination with maximal train TP whose threshold yields
    zero false positives on both the train and holdout candidate sweeps, or
    None when no combination can detect a single error safely.
    """
    try:
        train_mask, y_train = label_group_binary(train_truths, train_preds, group)
    except EmptyCandidateSet:
        return None
    if int(y_train.sum()) < 1:
        return None
    holdout_preds = np.asarray(holdout_preds)
    holdout_mask = holdout_preds == int(group.predicted)
    y_holdout = (
        np.asarray(holdout_truths)[holdout_mask] == int(group.truth)
    ).astype(np.int64)

    best: Corrector | None = None
    for kernel_name in kernels:
        feats_train = np.asarray(train_kernel_features[kernel_name])[train_mask]
        feats_holdout = np.asarray(holdout_kernel_features[kernel_name])[holdout_mask]
        for kind in classifier_kinds:
            try:
                cen, lda, s_train, s_holdout = _fit_and_score(
                    kind, feats_train, y_train, feats_holdout
                )
            except SingleClass:
                continue
            train_roc = roc_counts(s_train, y_train)
            holdout_roc = _roc_counts_unchecked(s_holdout, y_holdout)
            threshold = select_threshold_zero_fp(train_roc, holdout_roc)
            if threshold is None:
                continue
            train_tp = int(((s_train >= threshold) & (y_train == 1)).sum())
            holdout_tp = int(((s_holdout >= threshold) & (y_holdout == 1)).sum())
            candidate = Corrector(
                group=group,
                kernel_name=kernel_name,
                classifier_kind=kind,
                centroid=cen,
                lda=lda,
                threshold=float(threshold),
                enabled=True,
                train_tp=train_tp,
                train_positives=int(y_train.sum()),
                holdout_tp=holdout_tp,
                holdout_positives=int(y_holdout.sum()),
            )
            if best is None or candidate.train_tp > best.train_tp:
                best = candidate
    return best


# ---------------------------------------------------------------------------
# Corrected inference
# ---------------------------------------------------------------------------

def corrected_predict(bundle, feature_vector: np.ndarray) -> GestureLabel:
    """4-step cascade for one 100-feature sample.

    Base prediction, group routing gated by that prediction, corrector
    scoring, and override to the group's truth label when the score clears
    the zero-FP threshold.  Any missing stage falls back to the base
    prediction.
    """
    fv = np.atleast_2d(np.asarray(feature_vector, dtype=np.float64))
    z = pca_transform(bundle.base_pca, fv)
    base = int(knn_predict_batch(bundle.base_knn, z)[0])

    correctors = {c.group.group_id: c for c in bundle.correctors}
    gated = [
        g
        for g in sorted(set(correctors) | set(_classifier_ids(bundle)))
        if g % N_LABELS == base
    ]
    if not gated:
        return GestureLabel(base)
    if bundle.group_classifier is not None:
        feats = kernel_apply(bundle.group_classifier.kernel, fv)
        chosen = bundle.group_classifier.assign(feats[0], gated)
    else:
        chosen = gated[0] if len(gated) == 1 else None
    if chosen is None:
        return GestureLabel(base)
    corrector = correctors.get(chosen)
    if corrector is None or not corrector.enabled:
        return GestureLabel(base)
    kernel = bundle.corrector_kernels[corrector.kernel_name]
    score = float(corrector.score(kernel_apply(kernel, fv))[0])
    if score >= corrector.threshold:
        return GestureLabel(corrector.group.truth)
    return GestureLabel(base)


def _classifier_ids(bundle) -> tuple[int, ...]:
    if bundle.group_classifier is None:
        return ()
    return bundle.group_classifier.group_ids


def corrected_predict_batch(bundle, features: np.ndarray) -> np.ndarray:
    """Vectorized cascade over an (n, 100) feature matrix."""
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    z = pca_transform(bundle.base_pca, features)
    base = knn_predict_batch(bundle.base_knn, z)
    out = base.copy()

    correctors = {c.group.group_id: c for c in bundle.correctors}
    all_ids = sorted(set(correctors) | set(_classifier_ids(bundle)))
    if not all_ids:
        return out

    gc = bundle.group_classifier
    gc_feats = kernel_apply(gc.kernel, features) if gc is not None else None
    assigned = np.full(len(features), -1, dtype=np.int64)
    for pred in np.unique(base):
        rows = np.nonzero(base == pred)[0]
        gated = [g for g in all_ids if g % N_LABELS == int(pred)]
        if not gated:
            continue
        if gc is not None:
            for i in rows:
                g = gc.assign(gc_feats[i], gated)
                if g is not None:
                    assigned[i] = g
        elif len(gated) == 1:
            assigned[rows] = gated[0]

    for group_id in np.unique(assigned):
        if group_id < 0:
            continue
        corrector = correctors.get(int(group_id))
        if corrector is None or not corrector.enabled:
            continue
        rows = np.nonzero(assigned == group_id)[0]
        kernel = bundle.corrector_kernels[corrector.kernel_name]
        scores = corrector.score(kernel_apply(kernel, features[rows]))
        fire = rows[scores >= corrector.threshold]
        out[fire] = int(corrector.group.truth)
    return out


def audit_records(correctors: Sequence[Corrector]) -> list[dict]:
    """Machine-readable per-group corrector audit."""
    return [
        {
            "group_id": c.group.group_id,
            "pattern": c.group.describe(),
            "kernel": c.kernel_name,
            "classifier": c.classifier_kind,
            "threshold": c.threshold,
            "train_tp": c.train_tp,
            "train_errors": c.train_positives,
            "holdout_tp": c.holdout_tp,
            "holdout_errors": c.holdout_positives,
            "enabled": c.enabled,
        }
        for c in sorted(correctors, key=lambda c: c.group.group_id)
    ]


def format_audit(records: Sequence[dict]) -> str:
    if not records:
        return "no correctors trained\n"
    header = (
        f"{'group':>5}  {'pattern':<26} {'kernel':<24} {'clf':<8} "
        f"{'threshold':>10} {'train TP/err':>13} {'holdout TP/err':>15}  enabled"
    )
    lines = [header, "-" * len(header)]
    for r in records:
        lines.append(
            f"{r['group_id']:>5}  {r['pattern']:<26} {r['kernel']:<24} "
            f"{r['classifier']:<8} {r['threshold']:>10.4f} "
            f"{r['train_tp']:>6}/{r['train_errors']:<6} "
            f"{r['holdout_tp']:>7}/{r['holdout_errors']:<7}  {r['enabled']}"
        )
    return "\n".join(lines) + "\n"
