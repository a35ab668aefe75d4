"""End-to-end orchestration: training, evaluation, persistence, latency.

The deployable artifact is a :class:`ModelBundle`: the frozen base model
(uncentered PCA + KNN) plus the group classifier and the zero-FP error
correctors, serialized into a checksummed container under the 5 MB budget.
"""

from __future__ import annotations

import hashlib
import pickle
import platform
import struct
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import corrector as corr
from .classify import (
    CentroidModel,
    KnnModel,
    LdaModel,
    knn_fit,
    knn_predict_batch,
)
from .config import PipelineConfig
from .corrector import (
    Corrector,
    ErrorGroup,
    GroupClassifier,
    corrected_predict,
    corrected_predict_batch,
    discover_groups,
    train_corrector,
    train_group_classifier,
)
from .embed import (
    FittedKernel,
    KernelSpec,
    PcaModel,
    Standardizer,
    WhitenModel,
    kernel_apply,
    kernel_fit,
    parse_kernel_spec,
    pca_fit,
    pca_transform,
)
from .errors import (
    CorruptFile,
    EmptyEvalSet,
    EmptySplit,
    OversizeBundle,
    TooFewGroups,
    VersionMismatch,
)
from .signals import (
    DatasetSplit,
    GestureLabel,
    Sample,
    feature_matrix,
    label_array,
    split_by_user,
)

BUNDLE_MAGIC = b"CGMB"
BUNDLE_FORMAT_VERSION = 1
BUNDLE_SIZE_BUDGET = 5 * 1024 * 1024  # bytes
N_LABELS = len(GestureLabel)


@dataclass(frozen=True)
class ModelBundle:
    """The full deployable artifact."""

    config: PipelineConfig
    base_pca: PcaModel
    base_knn: KnnModel
    group_classifier: GroupClassifier | None
    correctors: tuple[Corrector, ...]
    corrector_kernels: Mapping[str, FittedKernel]
    discovered_group_ids: tuple[int, ...]
    metadata: Mapping[str, object]

    def predict(self, feature_vector: np.ndarray) -> GestureLabel:
        return corrected_predict(self, feature_vector)

    def predict_batch(self, features: np.ndarray) -> np.ndarray:
        return corrected_predict_batch(self, features)

    def predict_base_batch(self, features: np.ndarray) -> np.ndarray:
        z = pca_transform(self.base_pca, np.atleast_2d(features))
        return knn_predict_batch(self.base_knn, z)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def train_pipeline(config: PipelineConfig, split: DatasetSplit) -> ModelBundle:
    """Train the base model and its corrector cascade on one split.

    PCA is fit on the train partition; the KNN references come from the
    validation partition (two-stage protocol), or from train under the
    ablation flag.  Error groups, the group classifier, and the correctors
    are trained on train-partition base-model errors, with the validation
    partition as the zero-FP holdout sweep.
    """
    if not split.train or not split.validation:
        raise EmptySplit("train and validation partitions must be nonempty")
    x_train = feature_matrix(split.train)
    y_train = label_array(split.train)
    x_val = feature_matrix(split.validation)
    y_val = label_array(split.validation)

    base_pca = pca_fit(x_train, config.n_pcs, centered=False)
    if config.base_knn_fit == "validation":
        ref_x, ref_y = x_val, y_val
    else:
        ref_x, ref_y = x_train, y_train
    base_knn = knn_fit(pca_transform(base_pca, ref_x), ref_y, config.knn_k)

    preds_train = knn_predict_batch(base_knn, pca_transform(base_pca, x_train))
    preds_val = knn_predict_batch(base_knn, pca_transform(base_pca, x_val))

    groups = discover_groups(y_train, preds_train, config.min_support)

    # fit every kernel once on the train partition; specs are shared by name
    kernel_names = list(dict.fromkeys((config.group_kernel, *config.corrector_kernels)))
    kernels = {name: kernel_fit(parse_kernel_spec(name), x_train) for name in kernel_names}
    corrector_kernels = {name: kernels[name] for name in config.corrector_kernels}
    feats_train = {name: kernel_apply(k, x_train) for name, k in corrector_kernels.items()}
    feats_val = {name: kernel_apply(k, x_val) for name, k in corrector_kernels.items()}

    group_classifier = None
    err_mask = preds_train != y_train
    if np.any(err_mask) and groups:
        err_group_ids = N_LABELS * y_train[err_mask] + preds_train[err_mask]
        try:
            group_classifier = train_group_classifier(
                x_train[err_mask],
                err_group_ids,
                kernels[config.group_kernel],
                kind=config.group_classifier_kind,
                min_support=config.min_support,
            )
        except TooFewGroups:
            group_classifier = None  # cascade gates by base prediction alone

    correctors = []
    for group in groups:
        trained = train_corrector(
            group,
            corrector_kernels,
            feats_train,
            feats_val,
            y_train,
            preds_train,
            y_val,
            preds_val,
            classifier_kinds=config.corrector_classifiers,
        )
        if trained is not None:
            correctors.append(trained)

    metadata = {
        "n_train": len(split.train),
        "n_validation": len(split.validation),
        "n_test": len(split.test),
        "n_hold": len(split.hold),
        "n_train_errors": int(err_mask.sum()),
        "user_assignment": dict(sorted(split.user_assignment.items())),
    }
    return ModelBundle(
        config=config,
        base_pca=base_pca,
        base_knn=base_knn,
        group_classifier=group_classifier,
        correctors=tuple(correctors),
        corrector_kernels=corrector_kernels,
        discovered_group_ids=tuple(g.group_id for g in groups),
        metadata=metadata,
    )


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvalReport:
    n_samples: int
    base_accuracy: float
    corrected_accuracy: float
    per_group: tuple[dict, ...]
    confusion_base: np.ndarray       # (5, 5), rows = truth
    confusion_corrected: np.ndarray

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "base_accuracy": self.base_accuracy,
            "corrected_accuracy": self.corrected_accuracy,
            "per_group": list(self.per_group),
            "confusion_base": self.confusion_base.tolist(),
            "confusion_corrected": self.confusion_corrected.tolist(),
        }

    def format_text(self) -> str:
        lines = [
            f"samples: {self.n_samples}",
            f"overall accuracy: base {self.base_accuracy:.4f}"
            f"  base+corrector {self.corrected_accuracy:.4f}",
        ]
        if self.per_group:
            lines.append(
                f"{'group':>5}  {'pattern':<26} {'candidates':>10} "
                f"{'base':>8} {'corrected':>10}  corrector"
            )
            for row in self.per_group:
                lines.append(
                    f"{row['group_id']:>5}  {row['pattern']:<26} "
                    f"{row['n_candidates']:>10} {row['base_accuracy']:>8.4f} "
                    f"{row['corrected_accuracy']:>10.4f}  {row['corrector']}"
                )
        return "\n".join(lines) + "\n"


def _confusion(truths: np.ndarray, preds: np.ndarray) -> np.ndarray:
    m = np.zeros((N_LABELS, N_LABELS), dtype=np.int64)
    np.add.at(m, (truths, preds), 1)
    return m


def evaluate(bundle: ModelBundle, samples: Sequence[Sample]) -> EvalReport:
    """Accuracy of the base and corrected paths, overall and per error group."""
    if not samples:
        raise EmptyEvalSet("evaluation needs at least one sample")
    x = feature_matrix(samples)
    y = label_array(samples)
    base = bundle.predict_base_batch(x)
    corrected = bundle.predict_batch(x)

    per_group = []
    correctors = {c.group.group_id: c for c in bundle.correctors}
    for group_id in bundle.discovered_group_ids:
        group = ErrorGroup.from_id(group_id)
        mask = base == int(group.predicted)
        n = int(mask.sum())
        trained = correctors.get(group_id)
        per_group.append(
            {
                "group_id": group_id,
                "pattern": group.describe(),
                "n_candidates": n,
                "base_accuracy": float((base[mask] == y[mask]).mean()) if n else float("nan"),
                "corrected_accuracy": float((corrected[mask] == y[mask]).mean())
                if n
                else float("nan"),
                "corrector": trained.kernel_name if trained else "none",
            }
        )
    return EvalReport(
        n_samples=len(samples),
        base_accuracy=float((base == y).mean()),
        corrected_accuracy=float((corrected == y).mean()),
        per_group=tuple(per_group),
        confusion_base=_confusion(y, base),
        confusion_corrected=_confusion(y, corrected),
    )


def cross_validate(
    config: PipelineConfig,
    samples: Sequence[Sample],
    n_combos: int,
) -> dict:
    """Repeat split/train/evaluate over user combinations with a pinned hold set.

    The hold users are fixed across all combinations; every other partition
    reshuffles with the combo index folded into the split seed.
    """
    pinned = config.pinned_hold
    if not pinned:
        # default: pin the lexicographically last hold-count users
        users = sorted({s.user_id for s in samples})
        pinned = tuple(users[-config.user_counts[3] :])
    accs: dict[str, dict[str, list[float]]] = {
        name: {"base": [], "corrected": []}
        for name in ("train", "validation", "test", "hold")
    }
    for combo in range(n_combos):
        split = split_by_user(
            samples,
            user_counts=config.user_counts,
            seed=config.split_seed + combo,
            pinned_hold=pinned,
        )
        bundle = train_pipeline(config, split)
        for name in accs:
            part = split.partition(name)
            if not part:
                continue
            report = evaluate(bundle, part)
            accs[name]["base"].append(report.base_accuracy)
            accs[name]["corrected"].append(report.corrected_accuracy)

    summary: dict = {"n_combos": n_combos, "pinned_hold": list(pinned), "splits": {}}
    for name, paths in accs.items():
        summary["splits"][name] = {
            path: {
                "mean": float(np.mean(vals)),
                "std": float(np.std(vals)),
                "min": float(np.min(vals)),
                "max": float(np.max(vals)),
            }
            for path, vals in paths.items()
            if vals
        }
    return summary


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def _pca_state(m: PcaModel) -> dict:
    return {
        "components": m.components,
        "singular_values": m.singular_values,
        "explained_variance_ratio": m.explained_variance_ratio,
        "centered": m.centered,
        "mean": m.mean,
    }


def _kernel_state(k: FittedKernel) -> dict:
    return {
        "spec": k.spec.encode(),
        "std": None if k.std is None else {"mean": k.std.mean, "scale": k.std.scale},
        "pca": None if k.pca is None else _pca_state(k.pca),
        "whiten": None
        if k.whiten is None
        else {"mean": k.whiten.mean, "rotation": k.whiten.rotation, "scale": k.whiten.scale},
        "base": None if k.base is None else _kernel_state(k.base),
        "train_base": k.train_base,
        "children": [_kernel_state(c) for c in k.children],
    }


def _kernel_from_state(state: dict) -> FittedKernel:
    return FittedKernel(
        spec=parse_kernel_spec(state["spec"]),
        std=None if state["std"] is None else Standardizer(**state["std"]),
        pca=None if state["pca"] is None else PcaModel(**state["pca"]),
        whiten=None if state["whiten"] is None else WhitenModel(**state["whiten"]),
        base=None if state["base"] is None else _kernel_from_state(state["base"]),
        train_base=state["train_base"],
        children=tuple(_kernel_from_state(c) for c in state["children"]),
    )


def _corrector_state(c: Corrector) -> dict:
    return {
        "group_id": c.group.group_id,
        "kernel_name": c.kernel_name,
        "classifier_kind": c.classifier_kind,
        "centroid": None
        if c.centroid is None
        else {"classes": c.centroid.classes, "centroids": c.centroid.centroids},
        "lda": None
        if c.lda is None
        else {
            "w": c.lda.w,
            "bias": c.lda.bias,
            "mu0": c.lda.mu0,
            "mu1": c.lda.mu1,
            "s_w": c.lda.s_w,
            "s_b": c.lda.s_b,
        },
        "threshold": c.threshold,
        "enabled": c.enabled,
        "train_tp": c.train_tp,
        "train_positives": c.train_positives,
        "holdout_tp": c.holdout_tp,
        "holdout_positives": c.holdout_positives,
    }


def _corrector_from_state(state: dict) -> Corrector:
    return Corrector(
        group=ErrorGroup.from_id(state["group_id"]),
        kernel_name=state["kernel_name"],
        classifier_kind=state["classifier_kind"],
        centroid=None if state["centroid"] is None else CentroidModel(**state["centroid"]),
        lda=None if state["lda"] is None else LdaModel(**state["lda"]),
        threshold=state["threshold"],
        enabled=state["enabled"],
        train_tp=state["train_tp"],
        train_positives=state["train_positives"],
        holdout_tp=state["holdout_tp"],
        holdout_positives=state["holdout_positives"],
    )


def bundle_state(bundle: ModelBundle) -> dict:
    gc = bundle.group_classifier
    return {
        "config": {
            f: getattr(bundle.config, f) for f in bundle.config.__dataclass_fields__
        },
        "base_pca": _pca_state(bundle.base_pca),
        "base_knn": {
            "points": bundle.base_knn.points,
            "labels": bundle.base_knn.labels,
            "k": bundle.base_knn.k,
        },
        "group_classifier": None
        if gc is None
        else {
            "kernel": _kernel_state(gc.kernel),
            "kind": gc.kind,
            "group_ids": gc.group_ids,
            "centroid": None
            if gc.centroid is None
            else {"classes": gc.centroid.classes, "centroids": gc.centroid.centroids},
            "lda_models": [
                (g, {"w": m.w, "bias": m.bias, "mu0": m.mu0, "mu1": m.mu1, "s_w": m.s_w, "s_b": m.s_b})
                for g, m in gc.lda_models
            ],
        },
        "correctors": [_corrector_state(c) for c in bundle.correctors],
        "corrector_kernels": {
            name: _kernel_state(k) for name, k in bundle.corrector_kernels.items()
        },
        "discovered_group_ids": bundle.discovered_group_ids,
        "metadata": dict(bundle.metadata),
    }


def bundle_from_state(state: dict) -> ModelBundle:
    gc_state = state["group_classifier"]
    gc = None
    if gc_state is not None:
        gc = GroupClassifier(
            kernel=_kernel_from_state(gc_state["kernel"]),
            kind=gc_state["kind"],
            group_ids=tuple(gc_state["group_ids"]),
            centroid=None
            if gc_state["centroid"] is None
            else CentroidModel(**gc_state["centroid"]),
            lda_models=tuple(
                (g, LdaModel(**m)) for g, m in gc_state["lda_models"]
            ),
        )
    return ModelBundle(
        config=PipelineConfig(**state["config"]),
        base_pca=PcaModel(**state["base_pca"]),
        base_knn=KnnModel(
            points=state["base_knn"]["points"],
            labels=state["base_knn"]["labels"],
            k=state["base_knn"]["k"],
        ),
        group_classifier=gc,
        correctors=tuple(_corrector_from_state(c) for c in state["correctors"]),
        corrector_kernels={
            name: _kernel_from_state(k) for name, k in state["corrector_kernels"].items()
        },
        discovered_group_ids=tuple(state["discovered_group_ids"]),
        metadata=state["metadata"],
    )


def serialize_bundle(bundle: ModelBundle) -> bytes:
    payload = pickle.dumps(bundle_state(bundle), protocol=4)
    digest = hashlib.sha256(payload).digest()
    header = BUNDLE_MAGIC + struct.pack("<I", BUNDLE_FORMAT_VERSION) + digest
    return header + payload


def save_bundle(bundle: ModelBundle, path: Path) -> int:
    """Write the versioned container; refuses to exceed the 5 MB budget."""
    blob = serialize_bundle(bundle)
    if len(blob) >= BUNDLE_SIZE_BUDGET:
        raise OversizeBundle(
            f"bundle is {len(blob)} bytes, budget is {BUNDLE_SIZE_BUDGET}"
        )
    Path(path).write_bytes(blob)
    return len(blob)


def load_bundle(path: Path) -> ModelBundle:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise CorruptFile(f"cannot read bundle {path}: {exc}") from exc
    if len(blob) < 40 or blob[:4] != BUNDLE_MAGIC:
        raise CorruptFile(f"{path}: not a capgest bundle")
    (version,) = struct.unpack("<I", blob[4:8])
    if version != BUNDLE_FORMAT_VERSION:
        raise VersionMismatch(
            f"{path}: format version {version}, expected {BUNDLE_FORMAT_VERSION}"
        )
    digest, payload = blob[8:40], blob[40:]
    if hashlib.sha256(payload).digest() != digest:
        raise CorruptFile(f"{path}: checksum mismatch")
    try:
        state = pickle.loads(payload)
        return bundle_from_state(state)
    except Exception as exc:
        raise CorruptFile(f"{path}: cannot decode payload: {exc}") from exc


# ---------------------------------------------------------------------------
# Latency
# ---------------------------------------------------------------------------

def bench_latency(
    bundle: ModelBundle,
    features: np.ndarray,
    warmup: int = 50,
    iters: int = 500,
) -> dict:
    """Single-threaded per-sample latency of the corrected cascade.

    Each timed call runs the full single-sample path end to end; stats are
    reported in milliseconds.
    """
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if features.shape[0] == 0 or iters == 0:
        return {"n_timed": 0, "hardware": platform.processor() or platform.machine()}
    n = features.shape[0]
    for i in range(min(warmup, n * 2)):
        corrected_predict(bundle, features[i % n])
    timings = np.empty(iters)
    for i in range(iters):
        fv = features[i % n]
        start = time.perf_counter_ns()
        corrected_predict(bundle, fv)
        timings[i] = time.perf_counter_ns() - start
    ms = timings / 1e6
    return {
        "n_timed": iters,
        "p50_ms": float(np.percentile(ms, 50)),
        "p95_ms": float(np.percentile(ms, 95)),
        "max_ms": float(ms.max()),
        "mean_ms": float(ms.mean()),
        "hardware": platform.processor() or platform.machine(),
    }


def audit_report(bundle: ModelBundle) -> list[dict]:
    return corr.audit_records(bundle.correctors)
