"""Confidence scoring functions over prediction bundles.

All scores share one orientation contract: higher value = more confident.
Entropy-, mutual-information- and distance-based scores are therefore stored
negated. Natural logarithm throughout, 0*ln(0) treated as 0.

Softmax arithmetic is precision-controlled so that ranking degradation from
reduced-precision storage/compute can be reproduced exactly:

    f64  native double
    f32  native single (inputs cast, every op in float32)
    f16  emulated: inputs and every elementary result rounded to half
         precision (round-to-nearest-even) while carried in f64, with a fixed
         sequential summation order per row

The emulation keeps results platform-independent; native half floats are not
uniformly available.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from .core import PredictionBundle
from .errors import (
    ClassUnderpopulated,
    InvalidParameter,
    MissingFeatures,
    MissingMcdStack,
    NonFiniteValue,
    SingularCovariance,
    UnknownExternal,
)

F16 = "f16"
F32 = "f32"
F64 = "f64"
PRECISIONS = (F16, F32, F64)

MSR = "msr"
PE = "pe"
MLS = "mls"
MCD_MSR = "mcd-msr"
MCD_PE = "mcd-pe"
MCD_EE = "mcd-ee"
MCD_MI = "mcd-mi"
MCD_MLS = "mcd-mls"
MAHA = "maha"
EXTERNAL_PREFIX = "ext:"
CSF_IDS = (MSR, PE, MLS, MCD_MSR, MCD_PE, MCD_EE, MCD_MI, MCD_MLS, MAHA)


@dataclass(frozen=True)
class SoftmaxConfig:
    precision: str = F64
    temperature: float = 1.0

    def __post_init__(self):
        if self.precision not in PRECISIONS:
            raise InvalidParameter(f"precision must be one of {PRECISIONS}, got {self.precision!r}")
        if not (self.temperature > 0):
            raise InvalidParameter(f"temperature must be positive, got {self.temperature}")


@dataclass
class ConfidenceVector:
    csf_id: str
    scores: np.ndarray        # (n,) f64
    precision_mode: str = F64


def _round_f16(x: np.ndarray) -> np.ndarray:
    # round-to-nearest-even via the IEEE half type, kept on f64 carriers
    return np.asarray(x, dtype=np.float64).astype(np.float16).astype(np.float64)


def quantize(arr: np.ndarray, precision: str) -> np.ndarray:
    """Round array entries to the storage grid of the given precision."""
    arr = np.asarray(arr, dtype=np.float64)
    if precision == F64:
        return arr
    if precision == F32:
        return arr.astype(np.float32).astype(np.float64)
    if precision == F16:
        return _round_f16(arr)
    raise InvalidParameter(f"unknown precision {precision!r}")


def _softmax_f16(x: np.ndarray, temperature: float) -> np.ndarray:
    x = _round_f16(x)
    x = _round_f16(x / _round_f16(temperature))
    m = np.max(x, axis=-1, keepdims=True)          # selection, exact
    d = _round_f16(x - m)
    e = _round_f16(np.exp(d))
    s = e[..., 0]
    for j in range(1, e.shape[-1]):                # fixed left-to-right order
        s = _round_f16(s + e[..., j])
    return _round_f16(e / s[..., None])


def softmax(logits: np.ndarray, cfg: SoftmaxConfig | None = None) -> np.ndarray:
    """Stable (max-subtracted) softmax along the last axis at cfg precision.

    Returns f64 arrays whose values lie on the configured precision grid.
    """
    cfg = cfg or SoftmaxConfig()
    x = np.asarray(logits, dtype=np.float64)
    if cfg.precision == F16:
        return _softmax_f16(x, cfg.temperature)
    if cfg.precision == F32:
        x32 = x.astype(np.float32) / np.float32(cfg.temperature)
        m = np.max(x32, axis=-1, keepdims=True)
        e = np.exp(x32 - m)
        return (e / np.sum(e, axis=-1, keepdims=True)).astype(np.float64)
    x = x / cfg.temperature
    m = np.max(x, axis=-1, keepdims=True)
    e = np.exp(x - m)
    return e / np.sum(e, axis=-1, keepdims=True)


def _entropy(p: np.ndarray) -> np.ndarray:
    """Rowwise -sum p ln p along the last axis, 0 ln 0 = 0."""
    safe = np.where(p > 0, p, 1.0)
    return -np.sum(np.where(p > 0, p * np.log(safe), 0.0), axis=-1)


def fit_mahalanobis(train_features: np.ndarray, train_labels: np.ndarray, ridge: float | None = None):
    """Class means plus shared covariance of class-centered features.

    ridge=None uses 1e-6 * trace(cov) / dim; pass an absolute value when the
    features are degenerate enough that the trace itself vanishes.
    """
    feats = np.asarray(train_features, dtype=np.float64)
    labels = np.asarray(train_labels).astype(np.int64).reshape(-1)
    if feats.ndim != 2 or feats.shape[0] != labels.shape[0]:
        raise InvalidParameter(f"features {feats.shape} and labels {labels.shape} do not align")
    class_ids = np.unique(labels)
    if class_ids.size < 1:
        raise ClassUnderpopulated("no training rows")
    means = np.empty((class_ids.size, feats.shape[1]))
    centered = np.empty_like(feats)
    for k, cls in enumerate(class_ids):
        rows = labels == cls
        if rows.sum() < 2:
            raise ClassUnderpopulated(f"class {cls} has {int(rows.sum())} rows, need at least 2")
        means[k] = feats[rows].mean(axis=0)
        centered[rows] = feats[rows] - means[k]
    cov = centered.T @ centered / feats.shape[0]
    lam = 1e-6 * np.trace(cov) / feats.shape[1] if ridge is None else float(ridge)
    cov = cov + lam * np.eye(feats.shape[1])
    try:
        chol = cholesky(cov, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(f"covariance not positive definite (ridge {lam:g}): {exc}") from exc
    except Exception as exc:  # scipy raises its own LinAlgError type
        raise SingularCovariance(f"covariance not positive definite (ridge {lam:g}): {exc}") from exc
    return MahaModel(class_ids=class_ids, means=means, chol_lower=chol, ridge=lam)


@dataclass
class MahaModel:
    class_ids: np.ndarray     # (k,)
    means: np.ndarray         # (k, d)
    chol_lower: np.ndarray    # (d, d), L with L L^T = cov + ridge I
    ridge: float


def score_mahalanobis(model: MahaModel, features: np.ndarray) -> ConfidenceVector:
    """Negated minimum squared Mahalanobis distance to any class mean."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[1] != model.means.shape[1]:
        raise InvalidParameter(f"features {feats.shape} do not match model dim {model.means.shape[1]}")
    best = np.full(feats.shape[0], np.inf)
    for k in range(model.means.shape[0]):
        diff = feats - model.means[k]
        z = solve_triangular(model.chol_lower, diff.T, lower=True)
        best = np.minimum(best, np.sum(z * z, axis=0))
    return ConfidenceVector(csf_id=MAHA, scores=-best + 0.0, precision_mode=F64)


def _maha_from_bundle(bundle: PredictionBundle) -> MahaModel:
    # desk-scale convention: fit on the bundle's own inlier-labeled rows
    inlier = bundle.labels < bundle.n_classes
    return fit_mahalanobis(bundle.features[inlier], bundle.labels[inlier])


def compute_csf(
    bundle: PredictionBundle,
    csf_id: str,
    cfg: SoftmaxConfig | None = None,
    maha_model: MahaModel | None = None,
) -> ConfidenceVector:
    """Evaluate one confidence scoring function over all bundle rows."""
    cfg = cfg or SoftmaxConfig()

    if csf_id.startswith(EXTERNAL_PREFIX):
        name = csf_id[len(EXTERNAL_PREFIX):]
        if name not in bundle.externals:
            raise UnknownExternal(f"external score {name!r} not in bundle (has {sorted(bundle.externals)})")
        return ConfidenceVector(csf_id=csf_id, scores=bundle.externals[name].copy(), precision_mode=F64)

    if csf_id not in CSF_IDS:
        raise InvalidParameter(f"unknown CSF {csf_id!r}")

    if csf_id == MAHA:
        if bundle.features is None:
            raise MissingFeatures("maha requires bundle features")
        model = maha_model or _maha_from_bundle(bundle)
        return score_mahalanobis(model, bundle.features)

    if csf_id in (MSR, PE):
        p = softmax(bundle.logits, cfg)
        scores = np.max(p, axis=-1) if csf_id == MSR else -_entropy(p)
    elif csf_id == MLS:
        scores = np.max(bundle.logits, axis=-1)
    else:
        if bundle.mcd_logits is None:
            raise MissingMcdStack(f"{csf_id} requires the mcd_logits stack")
        if csf_id == MCD_MLS:
            scores = np.max(np.mean(bundle.mcd_logits, axis=1), axis=-1)
        else:
            p = softmax(bundle.mcd_logits, cfg)       # per pass, then aggregate
            mean_p = np.mean(p, axis=1)
            if csf_id == MCD_MSR:
                scores = np.max(mean_p, axis=-1)
            elif csf_id == MCD_PE:
                scores = -_entropy(mean_p)
            elif csf_id == MCD_EE:
                scores = -np.mean(_entropy(p), axis=-1)
            else:  # MCD_MI = predictive entropy minus expected entropy, negated
                scores = -(_entropy(mean_p) - np.mean(_entropy(p), axis=-1))

    scores = np.asarray(scores, dtype=np.float64)
    if np.isnan(scores).any():
        row = int(np.argwhere(np.isnan(scores))[0][0])
        raise NonFiniteValue(f"{csf_id}: NaN score at row {row}")
    return ConfidenceVector(csf_id=csf_id, scores=scores, precision_mode=cfg.precision)
