"""Study orchestration: which samples, which scores, which metrics, ranked how.

A study is a named slice of a bundle (by shift tag) evaluated under either
the standard protocol (every misclassification is a failure) or the new-class
protocol (inlier misclassifications are dismissed from the ranking mask;
accuracy still covers all samples). Results land in a MetricReport keyed by
(study, csf, metric), with competition ranks per (study, metric) column.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    NEWCLASS,
    NEWCLASS_TAGS,
    STANDARD,
    STUDY_KINDS,
    ALL_TAGS,
    PredictionBundle,
    ShiftTag,
    failure_labels,
)
from .errors import EmptyEvaluationSet, FdevalError, InvalidParameter
from . import metrics as M
from .risk_control import ece, platt_apply, platt_fit
from .scores import SoftmaxConfig, compute_csf, softmax

LOWER_BETTER = frozenset({"aurc", "e-aurc", "ece", "nll", "brier"})
KNOWN_METRICS = (
    "aurc",
    "e-aurc",
    "auroc-f",
    "ap-f",
    "ap-f-err",
    "auroc-out",
    "accuracy",
    "nll",
    "brier",
    "ece",
)
DEFAULT_METRICS = ("aurc", "e-aurc", "auroc-f", "accuracy")


@dataclass(frozen=True)
class StudySpec:
    name: str
    kind: str = STANDARD
    shift_filter: tuple[str, ...] = tuple(ALL_TAGS)
    metrics: tuple[str, ...] = DEFAULT_METRICS

    def __post_init__(self):
        if not self.name:
            raise InvalidParameter("study name must be non-empty")
        if self.kind not in STUDY_KINDS:
            raise InvalidParameter(f"study kind must be one of {STUDY_KINDS}, got {self.kind!r}")
        for tag in self.shift_filter:
            if tag not in ALL_TAGS:
                raise InvalidParameter(f"unknown shift tag {tag!r}")
        for m in self.metrics:
            if m not in KNOWN_METRICS:
                raise InvalidParameter(f"unknown metric {m!r}")
        if self.kind == NEWCLASS:
            if not any(t in NEWCLASS_TAGS for t in self.shift_filter):
                raise InvalidParameter(f"new-class study {self.name!r} must include a new-class tag")
            if ShiftTag.IID.value not in self.shift_filter:
                raise InvalidParameter(f"new-class study {self.name!r} must include the IID tag")


@dataclass
class MetricReport:
    values: dict[tuple[str, str, str], float] = field(default_factory=dict)
    ranks: dict[tuple[str, str], dict[str, int]] = field(default_factory=dict)
    study_info: dict[str, dict] = field(default_factory=dict)

    def merge(self, other: "MetricReport") -> "MetricReport":
        self.values.update(other.values)
        self.ranks.update(other.ranks)
        self.study_info.update(other.study_info)
        return self


def _ece_of(vec, flabels, bins: int) -> float:
    s = vec.scores
    if s.min() >= 0.0 and s.max() <= 1.0:
        calibrated = s
    else:
        masked_scores = s[flabels.eval_mask]
        masked_res = flabels.residuals[flabels.eval_mask]
        model = platt_fit(masked_scores, masked_res)
        calibrated = platt_apply(model, s)
    return ece(calibrated[flabels.eval_mask], flabels.residuals[flabels.eval_mask], bins=bins)


def run_study(
    bundle: PredictionBundle,
    spec: StudySpec,
    csf_ids,
    cfg: SoftmaxConfig | None = None,
    ece_bins: int = 15,
) -> MetricReport:
    """Evaluate every requested CSF under one study; returns a report fragment."""
    cfg = cfg or SoftmaxConfig()
    keep = np.isin(bundle.shift_tags, list(spec.shift_filter))
    if not keep.any():
        raise EmptyEvaluationSet(f"study {spec.name!r}: no samples match {spec.shift_filter}")
    sub = bundle.select(keep)
    flabels = failure_labels(sub, spec.kind)

    report = MetricReport()
    report.study_info[spec.name] = {
        "kind": spec.kind,
        "n": sub.n_samples,
        "n_evaluated": int(flabels.eval_mask.sum()),
    }

    probs = None
    inlier = sub.labels < sub.n_classes
    for csf in csf_ids:
        try:
            vec = compute_csf(sub, csf, cfg)
            curve = None
            for metric in spec.metrics:
                if metric in ("aurc", "e-aurc") and curve is None:
                    curve = M.rc_curve(vec, flabels)
                if metric == "aurc":
                    value = M.aurc(curve)
                elif metric == "e-aurc":
                    value = M.e_aurc(curve, flabels)
                elif metric == "auroc-f":
                    value = M.auroc_f(vec, flabels)
                elif metric == "ap-f":
                    value = M.ap_f(vec, flabels, positive="success")
                elif metric == "ap-f-err":
                    value = M.ap_f(vec, flabels, positive="failure")
                elif metric == "auroc-out":
                    value = M.auroc_out(vec, sub.labels == sub.n_classes, mask=flabels.eval_mask)
                elif metric == "accuracy":
                    value = M.accuracy(flabels)
                elif metric in ("nll", "brier"):
                    if probs is None:
                        probs = softmax(sub.logits, cfg)
                    fn = M.nll if metric == "nll" else M.brier
                    value = fn(probs[inlier], sub.labels[inlier])
                elif metric == "ece":
                    value = _ece_of(vec, flabels, ece_bins)
                else:  # unreachable, StudySpec validates names
                    raise InvalidParameter(f"unknown metric {metric!r}")
                report.values[(spec.name, csf, metric)] = float(value)
        except FdevalError as exc:
            raise type(exc)(f"[study {spec.name} / {csf}] {exc}") from exc
    return report


def rank_table(report: MetricReport) -> MetricReport:
    """Fill competition ranks (ties share the smallest rank) per study+metric."""
    columns: dict[tuple[str, str], list[tuple[str, float]]] = {}
    for (study, csf, metric), value in report.values.items():
        columns.setdefault((study, metric), []).append((csf, value))
    for (study, metric), entries in columns.items():
        lower = metric in LOWER_BETTER
        ranks = {}
        for csf, value in entries:
            if lower:
                better = sum(1 for _, v in entries if v < value)
            else:
                better = sum(1 for _, v in entries if v > value)
            ranks[csf] = 1 + better
        report.ranks[(study, metric)] = ranks
    return report
