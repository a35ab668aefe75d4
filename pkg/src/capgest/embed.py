"""Dimension reduction and high-dimensional feature kernels.

Uncentered PCA with an explained-variance ranking feeds the base model;
three explicit feature constructions (PCA, polynomial, neighbor-distance)
plus whitening feed the error correctors.  The Fisher-separability
intrinsic-dimension estimate characterizes the resulting feature spaces.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Sequence

import numpy as np

from . import neighbors
from .errors import (
    DegenerateInput,
    DimensionMismatch,
    ParamOutOfRange,
    TooFewSamples,
)

_SV_DROP = 1e-10  # directions below this singular value are dropped, not divided by


def _fix_signs(components: np.ndarray) -> np.ndarray:
    """Make each column's largest-magnitude coordinate positive (determinism)."""
    out = components.copy()
    for j in range(out.shape[1]):
        i = int(np.argmax(np.abs(out[:, j])))
        if out[i, j] < 0:
            out[:, j] = -out[:, j]
    return out


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PcaModel:
    components: np.ndarray          # (n_features, n_components), orthonormal
    singular_values: np.ndarray     # descending
    explained_variance_ratio: np.ndarray
    centered: bool
    mean: np.ndarray | None = None


def pca_fit(X: np.ndarray, n_components: int, centered: bool = False) -> PcaModel:
    """SVD-based principal components, optionally without centering.

    The base model keeps ``centered=False``: the inputs are already
    normalized to [0, 1], so the second-moment directions are used directly.
    Rank deficiency shows up as zero singular values, not as a failure.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatch(f"expected 2-D sample matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DegenerateInput("sample matrix contains non-finite values")
    if not 1 <= n_components <= min(X.shape):
        raise ParamOutOfRange(
            f"n_components={n_components} out of range for shape {X.shape}"
        )
    mean = None
    if centered:
        mean = X.mean(axis=0)
        X = X - mean
    _, s, vt = np.linalg.svd(X, full_matrices=False)
    total = float(np.sum(s**2))
    ratios = s**2 / total if total > 0 else np.zeros_like(s)
    return PcaModel(
        components=_fix_signs(vt[:n_components].T),
        singular_values=s[:n_components].copy(),
        explained_variance_ratio=ratios[:n_components].copy(),
        centered=centered,
        mean=mean,
    )


def pca_transform(model: PcaModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.components.shape[0]:
        raise DimensionMismatch(
            f"model expects {model.components.shape[0]} features, got {X.shape[1]}"
        )
    if model.centered:
        X = X - model.mean
    return X @ model.components


# ---------------------------------------------------------------------------
# Whitening
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WhitenModel:
    mean: np.ndarray
    rotation: np.ndarray   # (n_features, n_kept)
    scale: np.ndarray      # multiply rotated coordinates by this


def whiten_fit(X: np.ndarray) -> WhitenModel:
    """Fit the transform that gives the training output identity covariance.

    Directions with singular value below 1e-10 are dropped rather than
    divided by, so rank-deficient kernel outputs stay finite.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DegenerateInput("whitening needs at least 2 samples")
    mean = X.mean(axis=0)
    _, s, vt = np.linalg.svd(X - mean, full_matrices=False)
    keep = s >= _SV_DROP
    if not np.any(keep):
        raise DegenerateInput("whitening needs at least 2 distinct samples")
    rotation = _fix_signs(vt[keep].T)
    scale = math.sqrt(X.shape[0] - 1) / s[keep]
    return WhitenModel(mean=mean, rotation=rotation, scale=scale)


def whiten_apply(model: WhitenModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.rotation.shape[0]:
        raise DimensionMismatch(
            f"model expects {model.rotation.shape[0]} features, got {X.shape[1]}"
        )
    return (X - model.mean) @ model.rotation * model.scale


# ---------------------------------------------------------------------------
# Per-feature standardization (internal to the kernels)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        scale = np.where(std > 1e-12, std, 1.0)
        return cls(mean=mean, scale=scale)

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale


# ---------------------------------------------------------------------------
# Kernel specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelSpec:
    """Unfitted description of a feature construction.

    Canonical textual encodings: ``pca:9``, ``poly:5:4``, ``knn:10:150``,
    ``concat(pca:20,poly:5:4)``.
    """

    kind: str
    n_pc: int = 0
    n_poly: int = 0
    k_nn: int = 0
    children: tuple["KernelSpec", ...] = ()

    def __post_init__(self) -> None:
        if self.kind == "pca":
            if not 3 <= self.n_pc <= 100:
                raise ParamOutOfRange(f"pca kernel needs 3 <= n_pc <= 100, got {self.n_pc}")
        elif self.kind == "poly":
            if not 2 <= self.n_pc <= 20:
                raise ParamOutOfRange(f"poly kernel needs 2 <= n_pc <= 20, got {self.n_pc}")
            if not 2 <= self.n_poly <= 7:
                raise ParamOutOfRange(
                    f"poly kernel needs 2 <= n_poly <= 7, got {self.n_poly}"
                )
        elif self.kind == "knn":
            if not 2 <= self.n_pc <= 100:
                raise ParamOutOfRange(f"knn kernel needs 2 <= n_pc <= 100, got {self.n_pc}")
            if not 2 <= self.k_nn <= 300:
                raise ParamOutOfRange(f"knn kernel needs 2 <= k_nn <= 300, got {self.k_nn}")
        elif self.kind == "concat":
            if len(self.children) != 2:
                raise ParamOutOfRange("concat kernel needs exactly 2 children")
        else:
            raise ParamOutOfRange(f"unknown kernel kind {self.kind!r}")

    def encode(self) -> str:
        if self.kind == "pca":
            return f"pca:{self.n_pc}"
        if self.kind == "poly":
            return f"poly:{self.n_pc}:{self.n_poly}"
        if self.kind == "knn":
            return f"knn:{self.n_pc}:{self.k_nn}"
        return f"concat({self.children[0].encode()},{self.children[1].encode()})"


def parse_kernel_spec(text: str) -> KernelSpec:
    text = text.strip()
    m = re.fullmatch(r"concat\((.+)\)", text)
    if m:
        inner = m.group(1)
        depth = 0
        for i, c in enumerate(inner):
            if c == "(":
                depth += 1
            elif c == ")":
                depth -= 1
            elif c == "," and depth == 0:
                left, right = inner[:i], inner[i + 1 :]
                return KernelSpec(
                    kind="concat",
                    children=(parse_kernel_spec(left), parse_kernel_spec(right)),
                )
        raise ParamOutOfRange(f"cannot parse concat kernel {text!r}")
    parts = text.split(":")
    try:
        if parts[0] == "pca" and len(parts) == 2:
            return KernelSpec(kind="pca", n_pc=int(parts[1]))
        if parts[0] == "poly" and len(parts) == 3:
            return KernelSpec(kind="poly", n_pc=int(parts[1]), n_poly=int(parts[2]))
        if parts[0] == "knn" and len(parts) == 3:
            return KernelSpec(kind="knn", n_pc=int(parts[1]), k_nn=int(parts[2]))
    except ValueError as exc:
        raise ParamOutOfRange(f"cannot parse kernel spec {text!r}") from exc
    raise ParamOutOfRange(f"cannot parse kernel spec {text!r}")


def _monomials(B: np.ndarray, degree: int) -> np.ndarray:
    """All monomials of total degree 1..degree over B's columns, no constant."""
    cols = []
    for deg in range(1, degree + 1):
        for combo in combinations_with_replacement(range(B.shape[1]), deg):
            cols.append(np.prod(B[:, combo], axis=1))
    return np.column_stack(cols)


def monomial_count(n_features: int, degree: int) -> int:
    return math.comb(n_features + degree, degree) - 1


# ---------------------------------------------------------------------------
# Fitted kernels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FittedKernel:
    spec: KernelSpec
    std: Standardizer | None = None          # on raw input (pca) / expansion (poly, knn)
    pca: PcaModel | None = None              # pca stage of the pca kernel
    whiten: WhitenModel | None = None
    base: "FittedKernel | None" = None       # inner pca kernel for poly / knn
    train_base: np.ndarray | None = None     # knn reference set in base space
    children: tuple["FittedKernel", ...] = ()

    def apply(self, X: np.ndarray) -> np.ndarray:
        return kernel_apply(self, X)

    @property
    def n_output_features(self) -> int:
        if self.spec.kind == "concat":
            return sum(c.n_output_features for c in self.children)
        return self.whiten.rotation.shape[1]


def kernel_fit(spec: KernelSpec, X_train: np.ndarray) -> FittedKernel:
    X_train = np.asarray(X_train, dtype=np.float64)
    if X_train.ndim != 2 or X_train.shape[0] == 0:
        raise DegenerateInput("kernel_fit needs a nonempty 2-D training matrix")
    if spec.kind == "pca":
        std = Standardizer.fit(X_train)
        Z = std.apply(X_train)
        n_pc = min(spec.n_pc, min(Z.shape))
        pca = pca_fit(Z, n_pc, centered=True)
        P = pca_transform(pca, Z)
        return FittedKernel(spec=spec, std=std, pca=pca, whiten=whiten_fit(P))
    if spec.kind == "poly":
        base = kernel_fit(KernelSpec(kind="pca", n_pc=max(spec.n_pc, 3)), X_train)
        B = kernel_apply(base, X_train)[:, : spec.n_pc]
        M = _monomials(B, spec.n_poly)
        std = Standardizer.fit(M)
        return FittedKernel(
            spec=spec, std=std, whiten=whiten_fit(std.apply(M)), base=base
        )
    if spec.kind == "knn":
        if spec.k_nn >= X_train.shape[0]:
            raise ParamOutOfRange(
                f"knn kernel needs k_nn < n_train ({spec.k_nn} >= {X_train.shape[0]})"
            )
        base = kernel_fit(KernelSpec(kind="pca", n_pc=max(spec.n_pc, 3)), X_train)
        train_base = kernel_apply(base, X_train)[:, : spec.n_pc]
        D, _ = neighbors.query_topk(train_base, train_base, spec.k_nn)
        std = Standardizer.fit(D)
        return FittedKernel(
            spec=spec,
            std=std,
            whiten=whiten_fit(std.apply(D)),
            base=base,
            train_base=train_base,
        )
    # concat
    return FittedKernel(
        spec=spec, children=tuple(kernel_fit(c, X_train) for c in spec.children)
    )


def kernel_apply(kernel: FittedKernel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    spec = kernel.spec
    if spec.kind == "pca":
        return whiten_apply(
            kernel.whiten, pca_transform(kernel.pca, kernel.std.apply(X))
        )
    if spec.kind == "poly":
        B = kernel_apply(kernel.base, X)[:, : spec.n_pc]
        return whiten_apply(kernel.whiten, kernel.std.apply(_monomials(B, spec.n_poly)))
    if spec.kind == "knn":
        B = kernel_apply(kernel.base, X)[:, : spec.n_pc]
        D, _ = neighbors.query_topk(kernel.train_base, B, spec.k_nn)
        return whiten_apply(kernel.whiten, kernel.std.apply(D))
    return np.hstack([kernel_apply(c, X) for c in kernel.children])


# ---------------------------------------------------------------------------
# Fisher-separability intrinsic dimension
# ---------------------------------------------------------------------------

def separability_probability(alpha: float, n: float) -> float:
    """Closed-form inseparability probability for dimension n at level alpha."""
    return (1.0 - alpha**2) ** ((n + 1.0) / 2.0) / (alpha * math.sqrt(2.0 * math.pi * n))


def intrinsic_dimension(X: np.ndarray, alpha: float = 0.8) -> float:
    """Estimate dimensionality from the fraction of Fisher-inseparable pairs.

    Expects centered, whitened input.  Each point is projected to the unit
    sphere; a pair (x, y) is inseparable when <x, y> > alpha.  The mean
    per-point inseparable fraction is inverted through the closed form by
    bisection.  Returns +inf ("not measurable") when no inseparable pair
    exists at this sample size.
    """
    if not 0.0 < alpha < 1.0:
        raise ParamOutOfRange(f"alpha must be in (0, 1), got {alpha}")
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatch(f"expected 2-D matrix, got shape {X.shape}")
    norms = np.linalg.norm(X, axis=1)
    X = X[norms > 0]
    n_samples, n_features = X.shape
    if n_samples < 20:
        raise TooFewSamples(f"need >= 20 nonzero samples, got {n_samples}")
    U = X / np.linalg.norm(X, axis=1, keepdims=True)

    insep = 0
    chunk = max(1, int(4e6 // max(n_samples, 1)))
    for lo in range(0, n_samples, chunk):
        G = U[lo : lo + chunk] @ U.T
        # unit diagonal entries always count as inseparable; remove them
        insep += int((G > alpha).sum()) - G.shape[0]
    p_hat = insep / (n_samples * (n_samples - 1))
    if p_hat <= 0.0:
        return math.inf

    lo_n, hi_n = 1.0, 10.0 * n_features
    if p_hat >= separability_probability(alpha, lo_n):
        return lo_n
    if p_hat <= separability_probability(alpha, hi_n):
        return hi_n
    for _ in range(200):
        mid = 0.5 * (lo_n + hi_n)
        if separability_probability(alpha, mid) > p_hat:
            lo_n = mid
        else:
            hi_n = mid
    return 0.5 * (lo_n + hi_n)


def dataset_intrinsic_dimension(
    X: np.ndarray, alpha: float = 0.8, condition_limit: float = 10.0
) -> float:
    """Intrinsic dimension of a raw dataset, with standard preprocessing.

    Centers, keeps principal directions whose singular value is at least
    1/condition_limit of the largest (whitening the full spectrum would
    inflate pure-noise directions to unit variance), whitens the retained
    directions, then estimates.
    """
    X = np.asarray(X, dtype=np.float64)
    Xc = X - X.mean(axis=0)
    _, s, vt = np.linalg.svd(Xc, full_matrices=False)
    keep = s >= s[0] / condition_limit
    W = Xc @ vt[keep].T / s[keep] * math.sqrt(X.shape[0] - 1)
    return intrinsic_dimension(W, alpha)
