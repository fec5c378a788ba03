"""Prediction bundles: on-disk format, validation, and failure labels.

A bundle directory holds the stored outputs of one classifier run:

    meta.json          {"n": int, "c": int, "t": int, "d": int, "external": [names]}
    logits.csv         n rows x c columns, headerless
    labels.csv         n rows, integer class ids; c marks a new-class sample
    shift.csv          n rows, one ShiftTag name per row
    mcd_logits.csv     optional, n*t rows x c, sample-major (t rows per sample)
    features.csv       optional, n rows x d
    external_<x>.csv   optional, n rows, precomputed confidence scores

Every matrix file may instead be shipped as <name>.f64: a 16-byte header
(magic "FDSB", u32 rows, u32 cols, u32 reserved, little-endian) followed by
row-major IEEE-754 f64 payload. shift.csv is always CSV.
"""

from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    EmptyNewClassStudy,
    LabelOutOfRange,
    MissingFile,
    NonFiniteValue,
    ShapeMismatch,
)

STANDARD = "standard"
NEWCLASS = "newclass"
STUDY_KINDS = (STANDARD, NEWCLASS)

BINARY_MAGIC = b"FDSB"


class ShiftTag(str, enum.Enum):
    IID = "IID"
    COVARIATE = "COVARIATE"
    SUBCLASS = "SUBCLASS"
    NEWCLASS_SEMANTIC = "NEWCLASS_SEMANTIC"
    NEWCLASS_NONSEMANTIC = "NEWCLASS_NONSEMANTIC"


NEWCLASS_TAGS = (ShiftTag.NEWCLASS_SEMANTIC.value, ShiftTag.NEWCLASS_NONSEMANTIC.value)
ALL_TAGS = tuple(t.value for t in ShiftTag)


@dataclass
class PredictionBundle:
    """Validated in-memory view of one bundle directory."""

    logits: np.ndarray                      # (n, c) f64
    labels: np.ndarray                      # (n,) int64, values in [0, c]; c = new class
    shift_tags: np.ndarray                  # (n,) unicode, ShiftTag names
    mcd_logits: np.ndarray | None = None    # (n, t, c) f64
    features: np.ndarray | None = None      # (n, d) f64
    externals: dict[str, np.ndarray] = field(default_factory=dict)  # name -> (n,) f64

    @property
    def n_samples(self) -> int:
        return self.logits.shape[0]

    @property
    def n_classes(self) -> int:
        return self.logits.shape[1]

    @property
    def ood_label(self) -> int:
        # the sentinel class id reserved for new-class samples
        return self.n_classes

    def select(self, mask: np.ndarray) -> "PredictionBundle":
        """Row-subset view; mask is boolean over samples."""
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (self.n_samples,):
            raise ShapeMismatch(f"selection mask has shape {mask.shape}, expected ({self.n_samples},)")
        return PredictionBundle(
            logits=self.logits[mask],
            labels=self.labels[mask],
            shift_tags=self.shift_tags[mask],
            mcd_logits=None if self.mcd_logits is None else self.mcd_logits[mask],
            features=None if self.features is None else self.features[mask],
            externals={k: v[mask] for k, v in self.externals.items()},
        )


@dataclass
class FailureLabels:
    """Per-sample failure residuals plus the evaluation mask of a study."""

    residuals: np.ndarray   # (n,) int8, 1 = classifier failed on the sample
    eval_mask: np.ndarray   # (n,) bool, False = sample dismissed from ranking metrics


def _check_finite(arr: np.ndarray, name: str) -> None:
    bad = ~np.isfinite(arr)
    if bad.any():
        row = int(np.argwhere(bad)[0][0])
        raise NonFiniteValue(f"{name}: non-finite value at row {row}")


def _read_binary_matrix(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if len(raw) < 16 or raw[:4] != BINARY_MAGIC:
        raise ShapeMismatch(f"{path.name}: missing FDSB header")
    rows, cols, _ = struct.unpack("<III", raw[4:16])
    payload = np.frombuffer(raw, dtype="<f8", offset=16)
    if payload.size != rows * cols:
        raise ShapeMismatch(f"{path.name}: header promises {rows}x{cols}, payload holds {payload.size} values")
    return payload.reshape(rows, cols).astype(np.float64)


def _write_binary_matrix(path: Path, arr: np.ndarray) -> None:
    arr = np.atleast_2d(np.asarray(arr, dtype=np.float64))
    header = BINARY_MAGIC + struct.pack("<III", arr.shape[0], arr.shape[1], 0)
    path.write_bytes(header + arr.astype("<f8").tobytes(order="C"))


def _read_matrix(directory: Path, stem: str, required: bool) -> np.ndarray | None:
    """Load stem.csv or stem.f64 from directory; None if optional and absent."""
    csv_path = directory / f"{stem}.csv"
    bin_path = directory / f"{stem}.f64"
    if csv_path.exists():
        try:
            arr = np.loadtxt(csv_path, delimiter=",", dtype=np.float64, ndmin=2)
        except ValueError as exc:
            raise ShapeMismatch(f"{csv_path.name}: {exc}") from exc
        return arr
    if bin_path.exists():
        return _read_binary_matrix(bin_path)
    if required:
        raise MissingFile(f"{stem}.csv (or {stem}.f64) not found in {directory}")
    return None


def _as_labels(arr: np.ndarray, name: str, n_classes: int, allow_ood: bool) -> np.ndarray:
    arr = np.asarray(arr).reshape(-1)
    _check_finite(arr.astype(np.float64), name)
    rounded = np.rint(arr)
    if not np.array_equal(rounded, arr):
        row = int(np.argwhere(rounded != arr)[0][0])
        raise LabelOutOfRange(f"{name}: non-integer label at row {row}")
    labels = rounded.astype(np.int64)
    hi = n_classes if allow_ood else n_classes - 1
    bad = (labels < 0) | (labels > hi)
    if bad.any():
        row = int(np.argwhere(bad)[0][0])
        raise LabelOutOfRange(f"{name}: label {labels[row]} at row {row} outside [0, {hi}]")
    return labels


def validate_bundle(bundle: PredictionBundle) -> PredictionBundle:
    """Enforce the bundle invariants; returns the bundle for chaining."""
    logits = np.asarray(bundle.logits, dtype=np.float64)
    if logits.ndim != 2:
        raise ShapeMismatch(f"logits: expected 2-d array, got shape {logits.shape}")
    n, c = logits.shape
    if n < 1 or c < 2:
        raise ShapeMismatch(f"logits: need n >= 1 and c >= 2, got {n}x{c}")
    _check_finite(logits, "logits")
    bundle.logits = logits

    bundle.labels = _as_labels(bundle.labels, "labels", c, allow_ood=True)
    if bundle.labels.shape != (n,):
        raise ShapeMismatch(f"labels: {bundle.labels.shape[0]} rows, logits has {n}")

    tags = np.asarray(bundle.shift_tags, dtype="U24").reshape(-1)
    if tags.shape != (n,):
        raise ShapeMismatch(f"shift: {tags.shape[0]} rows, logits has {n}")
    known = np.isin(tags, ALL_TAGS)
    if not known.all():
        row = int(np.argwhere(~known)[0][0])
        raise LabelOutOfRange(f"shift: unknown tag {tags[row]!r} at row {row}")
    bundle.shift_tags = tags

    is_new = np.isin(tags, NEWCLASS_TAGS)
    is_ood = bundle.labels == c
    if (is_new != is_ood).any():
        row = int(np.argwhere(is_new != is_ood)[0][0])
        raise LabelOutOfRange(
            f"labels/shift: row {row} must carry label {c} exactly when tagged new-class"
        )

    if bundle.mcd_logits is not None:
        mcd = np.asarray(bundle.mcd_logits, dtype=np.float64)
        if mcd.ndim != 3 or mcd.shape[0] != n or mcd.shape[2] != c:
            raise ShapeMismatch(f"mcd_logits: expected ({n}, t, {c}), got {mcd.shape}")
        _check_finite(mcd.reshape(n, -1), "mcd_logits")
        bundle.mcd_logits = mcd

    if bundle.features is not None:
        feats = np.asarray(bundle.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] != n:
            raise ShapeMismatch(f"features: expected ({n}, d), got {feats.shape}")
        _check_finite(feats, "features")
        bundle.features = feats

    for name, col in bundle.externals.items():
        col = np.asarray(col, dtype=np.float64).reshape(-1)
        if col.shape != (n,):
            raise ShapeMismatch(f"external_{name}: {col.shape[0]} rows, logits has {n}")
        _check_finite(col, f"external_{name}")
        bundle.externals[name] = col

    return bundle


def load_bundle(path: str | Path) -> PredictionBundle:
    """Read and validate a bundle directory."""
    directory = Path(path)
    if not directory.is_dir():
        raise MissingFile(f"bundle directory {directory} not found")
    meta_path = directory / "meta.json"
    if not meta_path.exists():
        raise MissingFile(f"meta.json not found in {directory}")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise ShapeMismatch(f"meta.json: {exc}") from exc

    n, c = int(meta["n"]), int(meta["c"])
    t, d = int(meta.get("t", 0)), int(meta.get("d", 0))
    external_names = list(meta.get("external", []))

    logits = _read_matrix(directory, "logits", required=True)
    if logits.shape != (n, c):
        raise ShapeMismatch(f"logits: meta promises {n}x{c}, file holds {logits.shape[0]}x{logits.shape[1]}")

    labels = _read_matrix(directory, "labels", required=True).reshape(-1)
    if labels.shape[0] != n:
        raise ShapeMismatch(f"labels: meta promises {n} rows, file holds {labels.shape[0]}")

    shift_path = directory / "shift.csv"
    if not shift_path.exists():
        raise MissingFile(f"shift.csv not found in {directory}")
    tags = np.array([line.strip() for line in shift_path.read_text().splitlines() if line.strip()], dtype="U24")
    if tags.shape[0] != n:
        raise ShapeMismatch(f"shift.csv: meta promises {n} rows, file holds {tags.shape[0]}")

    mcd = None
    if t > 0:
        flat = _read_matrix(directory, "mcd_logits", required=True)
        if flat.shape != (n * t, c):
            raise ShapeMismatch(f"mcd_logits: meta promises {n * t}x{c}, file holds {flat.shape[0]}x{flat.shape[1]}")
        mcd = flat.reshape(n, t, c)

    features = None
    if d > 0:
        features = _read_matrix(directory, "features", required=True)
        if features.shape != (n, d):
            raise ShapeMismatch(f"features: meta promises {n}x{d}, file holds {features.shape[0]}x{features.shape[1]}")

    externals = {}
    for name in external_names:
        col = _read_matrix(directory, f"external_{name}", required=True)
        externals[name] = col.reshape(-1)

    bundle = PredictionBundle(
        logits=logits,
        labels=labels,
        shift_tags=tags,
        mcd_logits=mcd,
        features=features,
        externals=externals,
    )
    return validate_bundle(bundle)


def write_bundle(bundle: PredictionBundle, path: str | Path, binary: bool = False) -> Path:
    """Serialize a bundle to a directory in the documented layout."""
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    t = 0 if bundle.mcd_logits is None else bundle.mcd_logits.shape[1]
    d = 0 if bundle.features is None else bundle.features.shape[1]
    meta = {
        "n": bundle.n_samples,
        "c": bundle.n_classes,
        "t": t,
        "d": d,
        "external": sorted(bundle.externals),
    }
    meta_text = json.dumps(meta, sort_keys=True, indent=2) + "\n"
    (directory / "meta.json").write_text(meta_text)

    def emit(stem: str, arr: np.ndarray) -> None:
        arr2 = np.atleast_2d(np.asarray(arr, dtype=np.float64))
        if binary:
            _write_binary_matrix(directory / f"{stem}.f64", arr2)
        else:
            np.savetxt(directory / f"{stem}.csv", arr2, delimiter=",", fmt="%.17g")

    emit("logits", bundle.logits)
    emit("labels", bundle.labels.reshape(-1, 1))
    if bundle.mcd_logits is not None:
        emit("mcd_logits", bundle.mcd_logits.reshape(bundle.n_samples * t, bundle.n_classes))
    if bundle.features is not None:
        emit("features", bundle.features)
    for name, col in bundle.externals.items():
        emit(f"external_{name}", col.reshape(-1, 1))
    (directory / "shift.csv").write_text("\n".join(bundle.shift_tags.tolist()) + "\n")
    return directory


def predictions(bundle: PredictionBundle) -> np.ndarray:
    """Predicted class per row: argmax over logits, lowest index on ties."""
    return np.argmax(bundle.logits, axis=1)


def failure_labels(bundle: PredictionBundle, study_kind: str = STANDARD) -> FailureLabels:
    """Residuals (1 = wrong prediction) plus the study's evaluation mask.

    New-class samples carry the sentinel label c and therefore always count as
    failures. Under a new-class study, inlier (IID) misclassifications are
    dismissed from the evaluation mask: the classifier cannot be blamed for
    flagging a sample it would have gotten wrong anyway, so only its behaviour
    on correct inliers versus new-class samples is ranked. Accuracy reporting
    stays over all samples regardless of mask.
    """
    if study_kind not in STUDY_KINDS:
        raise ValueError(f"unknown study kind {study_kind!r}")
    preds = predictions(bundle)
    residuals = (preds != bundle.labels).astype(np.int8)
    eval_mask = np.ones(bundle.n_samples, dtype=bool)
    if study_kind == NEWCLASS:
        is_new = np.isin(bundle.shift_tags, NEWCLASS_TAGS)
        if not is_new.any():
            raise EmptyNewClassStudy("new-class study on a bundle with no new-class samples")
        is_iid = bundle.shift_tags == ShiftTag.IID.value
        eval_mask[is_iid & (residuals == 1)] = False
    return FailureLabels(residuals=residuals, eval_mask=eval_mask)
