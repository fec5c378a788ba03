"""Audit of softmax-confidence ranking under reduced floating-point precision.

Low-precision softmax collapses large logit gaps onto max-probability exactly
1.0, destroying the ranking that failure detection depends on even while
accuracy is untouched. The audit quantifies this per precision: the fraction
of informative rows whose top softmax rounds to exactly 1.0, plus AURC /
failure-AUROC of the resulting confidence vector. Mitigations mirrored here:
wider storage (f64) or temperature scaling before the softmax.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import PredictionBundle, ShiftTag, validate_bundle
from .errors import InvalidParameter
from .metrics import aurc, auroc_f, rc_curve
from .scores import F64, PRECISIONS, SoftmaxConfig, quantize, softmax

# A runner-up class is kept within this many nats of the top logit so that an
# f64 softmax always sees tail mass above the half-ulp at 1.0 (e^-35 ~ 6.3e-16
# > 2^-53): the f64 rate stays exactly 0 for any requested gap range while
# f16/f32 still collapse.
_RUNNER_UP_CAP = 35.0


@dataclass
class PrecisionAuditReport:
    precisions: list[str]
    round_to_one_rate: dict[str, float] = field(default_factory=dict)
    aurc: dict[str, float] = field(default_factory=dict)
    auroc_f: dict[str, float] = field(default_factory=dict)
    accuracy: dict[str, float] = field(default_factory=dict)


def round_to_one_count(logits: np.ndarray, precision: str, temperature: float = 1.0) -> int:
    """Rows whose max softmax is exactly 1.0 despite carrying >= 2 distinct logits."""
    p = softmax(logits, SoftmaxConfig(precision=precision, temperature=temperature))
    top = np.max(p, axis=-1)
    informative = np.max(logits, axis=-1) != np.min(logits, axis=-1)
    return int(np.sum((top == 1.0) & informative))


def audit(
    bundle: PredictionBundle,
    residuals: np.ndarray,
    precisions=PRECISIONS,
    temperature: float = 1.0,
    quantize_storage: bool = True,
) -> PrecisionAuditReport:
    """Evaluate max-softmax ranking at each precision against fixed residuals.

    quantize_storage=True reproduces the stored-at-low-precision scenario
    (logits rounded before any arithmetic); False keeps f64 storage and only
    reduces the softmax arithmetic.
    """
    for p in precisions:
        if p not in PRECISIONS:
            raise InvalidParameter(f"unknown precision {p!r}")
    res = np.asarray(residuals).astype(np.int64).reshape(-1)
    if res.shape[0] != bundle.n_samples:
        raise InvalidParameter(f"residuals {res.shape} do not match bundle ({bundle.n_samples},)")
    report = PrecisionAuditReport(precisions=list(precisions))
    for p in precisions:
        logits = quantize(bundle.logits, p) if quantize_storage else bundle.logits
        cfg = SoftmaxConfig(precision=p, temperature=temperature)
        msr = np.max(softmax(logits, cfg), axis=-1)
        informative = np.max(logits, axis=-1) != np.min(logits, axis=-1)
        report.round_to_one_rate[p] = float(np.mean((msr == 1.0) & informative))
        curve = rc_curve(msr, res)
        report.aurc[p] = aurc(curve)
        report.auroc_f[p] = auroc_f(msr, res)
        preds = np.argmax(logits, axis=1)
        report.accuracy[p] = float(np.mean(preds == bundle.labels))
    return report


def synthesize_highconf_bundle(
    n: int,
    c: int,
    failure_rate: float,
    gap_low: float,
    gap_high: float,
    seed: int,
) -> tuple[PredictionBundle, np.ndarray]:
    """Seeded bundle of high-gap logit rows for precision experiments.

    Each row puts its top class gap nats above the rest; correct samples draw
    larger gaps than failures on average, so full-precision max-softmax ranks
    failures well and collapsed low-precision ranking does not. Returns the
    bundle plus its residual vector.
    """
    if n < 1:
        raise InvalidParameter(f"n must be >= 1, got {n}")
    if c < 2:
        raise InvalidParameter(f"c must be >= 2, got {c}")
    if not (0.0 < failure_rate < 1.0):
        raise InvalidParameter(f"failure_rate must lie in (0, 1), got {failure_rate}")
    if gap_low < 0 or gap_high < gap_low:
        raise InvalidParameter(f"need 0 <= gap_low <= gap_high, got [{gap_low}, {gap_high}]")

    rng = np.random.default_rng(seed)
    residuals = (rng.random(n) < failure_rate).astype(np.int8)
    # overlapping gap ranges, failures biased low
    u = np.where(residuals == 1, rng.uniform(0.0, 0.7, n), rng.uniform(0.3, 1.0, n))
    gaps = gap_low + (gap_high - gap_low) * u

    top = rng.integers(0, c, n)
    second = (top + 1) % c
    logits = np.zeros((n, c))
    rows = np.arange(n)
    logits[rows, top] = gaps
    logits[rows, second] = np.maximum(0.0, gaps - _RUNNER_UP_CAP)

    labels = np.where(residuals == 1, second, top).astype(np.int64)
    # zero-gap rows are fully tied; argmax falls to class 0, keep labels consistent
    tied = gaps == 0.0
    if tied.any():
        labels[tied] = np.where(residuals[tied] == 1, 1, 0)

    bundle = PredictionBundle(
        logits=logits,
        labels=labels,
        shift_tags=np.full(n, ShiftTag.IID.value, dtype="U24"),
    )
    return validate_bundle(bundle), residuals
