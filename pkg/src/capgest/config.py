"""Pipeline configuration and its key-value text file format.

Config files are plain UTF-8 text: one ``key = value`` pair per line,
``#`` starts a comment.  List values are semicolon separated (kernel
encodings contain commas).  Unknown keys are rejected.

Example::

    n_pcs = 3
    knn_k = 5
    corrector_kernels = pca:20; poly:5:4; concat(pca:10,poly:5:4)
    pinned_hold = u14; u15
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import FileFormatError


@dataclass(frozen=True)
class PipelineConfig:
    # base model
    n_pcs: int = 3
    knn_k: int = 5
    base_knn_fit: str = "validation"   # "validation" (two-stage) or "train" (ablation)
    # corrector grid
    corrector_kernels: tuple[str, ...] = (
        "pca:20",
        "pca:9",
        "poly:5:4",
        "poly:8:3",
        "concat(pca:10,poly:5:4)",
    )
    corrector_classifiers: tuple[str, ...] = ("centroid", "lda")
    group_kernel: str = "pca:9"
    group_classifier_kind: str = "centroid"   # or "lda_ovr"
    min_support: int = 10
    # splits
    user_counts: tuple[int, int, int, int] = (8, 3, 2, 2)
    split_seed: int = 42
    pinned_hold: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.n_pcs < 1:
            raise FileFormatError("n_pcs must be >= 1")
        if self.knn_k < 1:
            raise FileFormatError("knn_k must be >= 1")
        if self.base_knn_fit not in ("validation", "train"):
            raise FileFormatError("base_knn_fit must be 'validation' or 'train'")
        if self.group_classifier_kind not in ("centroid", "lda_ovr"):
            raise FileFormatError("group_classifier_kind must be 'centroid' or 'lda_ovr'")


_INT_KEYS = {"n_pcs", "knn_k", "min_support", "split_seed"}
_STR_KEYS = {"base_knn_fit", "group_kernel", "group_classifier_kind"}
_STR_LIST_KEYS = {"corrector_kernels", "corrector_classifiers", "pinned_hold"}
_INT_LIST_KEYS = {"user_counts"}


def parse_config_text(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    config = base or PipelineConfig()
    overrides = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not sep or not key:
            raise FileFormatError(f"line {lineno}: expected 'key = value', got {raw!r}")
        try:
            if key in _INT_KEYS:
                overrides[key] = int(value)
            elif key in _STR_KEYS:
                overrides[key] = value
            elif key in _STR_LIST_KEYS:
                overrides[key] = tuple(
                    part.strip() for part in value.split(";") if part.strip()
                )
            elif key in _INT_LIST_KEYS:
                overrides[key] = tuple(int(p) for p in value.split(";"))
            else:
                raise FileFormatError(f"line {lineno}: unknown config key {key!r}")
        except ValueError as exc:
            raise FileFormatError(f"line {lineno}: bad value for {key}: {value!r}") from exc
    return replace(config, **overrides)


def load_config(path: Path, base: PipelineConfig | None = None) -> PipelineConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FileFormatError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, base=base)


def format_config(config: PipelineConfig) -> str:
    lines = []
    for f in fields(config):
        value = getattr(config, f.name)
        if isinstance(value, tuple):
            value = "; ".join(str(v) for v in value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
