"""Fusion-layer weight counting and per-layer feature capture."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .nn import ModelParams, forward_pass

DEFAULT_THRESHOLDS = (0.0025, 0.005, 0.0075, 0.01, 0.0125)
LAYER_TAGS = (
    "mi_input",
    "mi_spatial",
    "mi_temporal",
    "ssvep_input",
    "ssvep_spatial",
    "ssvep_temporal",
    "fusion_fc",
)

FEAT_MAGIC = b"FEAT"
FEAT_VERSION = 1
_FEAT_HEAD = struct.Struct("<4sI")
_FEAT_DIMS = struct.Struct("<II")


class FeatureFormatError(Exception):
    pass


@dataclass(frozen=True)
class RatioRow:
    threshold: float
    n_m: int
    n_s: int

    @property
    def ratio(self) -> float | None:
        return self.n_m / self.n_s if self.n_s else None


@dataclass
class WeightRatioReport:
    rows: list[RatioRow]
    flags: list[str] = field(default_factory=list)

    @property
    def thresholds(self) -> list[float]:
        return [r.threshold for r in self.rows]

    def to_dict(self) -> dict:
        return {
            "rows": [
                {"threshold": r.threshold, "n_m": r.n_m, "n_s": r.n_s, "ratio": r.ratio} for r in self.rows
            ],
            "flags": list(self.flags),
        }

    def to_table(self) -> str:
        header = ("threshold", "N_M", "N_S", "N_M/N_S")
        body = [
            (f"{r.threshold:g}", str(r.n_m), str(r.n_s), "-" if r.ratio is None else f"{r.ratio:.3f}")
            for r in self.rows
        ]
        widths = [max(len(row[i]) for row in [header, *body]) for i in range(4)]
        lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in [header, *body]]
        return "\n".join(lines + [f"note: {f}" for f in self.flags]) + "\n"


def weight_ratio(params: ModelParams, thresholds=DEFAULT_THRESHOLDS) -> WeightRatioReport:
    """Count hidden-FC weights with ``|w| > threshold`` in the MI and SSVEP row blocks."""
    cfg = params.config
    if cfg.fc_dim == 0:
        raise ValueError("model has no hidden fully connected layer (fc_dim=0)")
    if tuple(cfg.streams) != ("mi", "ssvep"):
        raise ValueError(f"weight ratio needs both streams, model has {list(cfg.streams)}")
    w = np.abs(params.params["fc.w"])
    mi = np.sort(w[params.fc_rows("mi")].ravel())
    ss = np.sort(w[params.fc_rows("ssvep")].ravel())
    rows, flags = [], []
    for th in thresholds:
        th = float(th)
        # strict ">": count what lies right of the last element <= th
        n_m = int(mi.size - np.searchsorted(mi, th, side="right"))
        n_s = int(ss.size - np.searchsorted(ss, th, side="right"))
        if n_s == 0:
            flags.append(f"threshold {th:g}: no SSVEP-side weight exceeds it, ratio omitted")
        rows.append(RatioRow(th, n_m, n_s))
    return WeightRatioReport(rows, flags)


@dataclass
class FeatureDump:
    tag: str
    features: np.ndarray  # (n_trials, dim) float32
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.uint8)
        if self.features.ndim != 2 or len(self.features) != len(self.labels):
            raise ValueError(
                f"features must be (n_trials, dim) with one label per row, "
                f"got {self.features.shape} and {len(self.labels)} labels"
            )

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def valid_tags(params: ModelParams) -> list[str]:
    cfg = params.config
    tags = [t for t in LAYER_TAGS[:-1] if t.split("_")[0] in cfg.streams]
    if cfg.fc_dim > 0:
        tags.append("fusion_fc")
    return tags


def extract_features(params: ModelParams, samples, tag: str, batch: int = 256) -> FeatureDump:
    """Inference-mode activations of one layer for every sample.

    Conv tags capture the post-activation maps; ``fusion_fc`` is the
    hidden layer after its activation and before batch norm.
    """
    allowed = valid_tags(params)
    if tag not in allowed:
        raise ValueError(f"unknown layer tag {tag!r} for this model; valid tags: {', '.join(allowed)}")
    chunks = []
    for lo in range(0, len(samples), batch):
        x_m = samples.x_m[lo : lo + batch]
        x_s = samples.x_s[lo : lo + batch]
        if tag == "mi_input":
            chunks.append(np.asarray(x_m, dtype=float).reshape(len(x_m), -1))
            continue
        if tag == "ssvep_input":
            chunks.append(np.asarray(x_s, dtype=float).reshape(len(x_s), -1))
            continue
        _, cache = forward_pass(x_m, x_s, params, training=False)
        if tag == "fusion_fc":
            chunks.append(cache["h"])
            continue
        stream, layer = tag.split("_")
        key = "a1" if layer == "spatial" else "a2"
        a = cache["streams"][stream][key]
        chunks.append(a.reshape(len(a), -1))
    if chunks:
        feats = np.concatenate(chunks)
    else:
        feats = np.zeros((0, 0))
    return FeatureDump(tag, feats, samples.y)


def save_feature_dump(dump: FeatureDump, path) -> None:
    raw = dump.tag.encode("utf-8")
    parts = [_FEAT_HEAD.pack(FEAT_MAGIC, FEAT_VERSION), bytes([len(raw)]), raw]
    parts.append(_FEAT_DIMS.pack(len(dump.labels), dump.dim))
    for label, row in zip(dump.labels, dump.features):
        parts.append(bytes([int(label)]))
        parts.append(np.ascontiguousarray(row, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_feature_dump(path) -> FeatureDump:
    buf = Path(path).read_bytes()
    if len(buf) < _FEAT_HEAD.size + 1:
        raise FeatureFormatError(f"{path}: file too short for a FEAT header")
    magic, version = _FEAT_HEAD.unpack_from(buf, 0)
    if magic != FEAT_MAGIC:
        raise FeatureFormatError(f"{path}: not a FEAT file (magic {magic!r})")
    if version != FEAT_VERSION:
        raise FeatureFormatError(f"{path}: FEAT version {version}, expected {FEAT_VERSION}")
    pos = _FEAT_HEAD.size
    ln = buf[pos]
    tag = buf[pos + 1 : pos + 1 + ln].decode("utf-8")
    pos += 1 + ln
    if len(buf) < pos + _FEAT_DIMS.size:
        raise FeatureFormatError(f"{path}: header truncated")
    n, dim = _FEAT_DIMS.unpack_from(buf, pos)
    pos += _FEAT_DIMS.size
    stride = 1 + 4 * dim
    if len(buf) - pos != n * stride:
        raise FeatureFormatError(f"{path}: expected {n * stride} bytes of records, found {len(buf) - pos}")
    rec = np.frombuffer(buf, dtype=np.uint8, offset=pos).reshape(n, stride)
    labels = rec[:, 0].copy()
    feats = np.ascontiguousarray(rec[:, 1:]).view("<f4").reshape(n, dim)
    return FeatureDump(tag, feats.astype(np.float32), labels)


def dump_features(params: ModelParams, samples, tag: str, path) -> FeatureDump:
    dump = extract_features(params, samples, tag)
    save_feature_dump(dump, path)
    return dump
