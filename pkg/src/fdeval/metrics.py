"""Ranking and proper-score metrics for failure detection.

The risk-coverage machinery follows one fixed sweep semantics: samples are
dropped in ascending confidence order (ties broken by sample index, so the
sweep is deterministic), a curve point is recorded when the sweep enters a new
confidence value, and a terminal zero-coverage point repeats the last recorded
risk whenever a trailing tie group leaves unrecorded weight. AURC integrates
the recorded points with trapezoids weighted by the coverage mass each point
absorbed. The companion oracle module re-implements the same sweep point by
point; the two must agree to 1e-12.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .core import FailureLabels
from .errors import DegenerateLabels, EmptyEvaluationSet, LabelOutOfRange, ShapeMismatch
from .scores import ConfidenceVector


@dataclass
class RiskCoverageCurve:
    coverages: np.ndarray   # strictly decreasing, starts at 1.0
    risks: np.ndarray       # selective risk at each recorded coverage
    weights: np.ndarray     # trapezoid masses, len(risks) - 1, summing to <= 1


def _conf_array(scores) -> np.ndarray:
    if isinstance(scores, ConfidenceVector):
        return np.asarray(scores.scores, dtype=np.float64)
    return np.asarray(scores, dtype=np.float64).reshape(-1)


def _residuals_and_mask(failure) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(failure, FailureLabels):
        return failure.residuals.astype(np.int64), failure.eval_mask.astype(bool)
    res = np.asarray(failure).astype(np.int64).reshape(-1)
    return res, np.ones(res.shape[0], dtype=bool)


def _masked(scores, failure) -> tuple[np.ndarray, np.ndarray]:
    conf = _conf_array(scores)
    res, mask = _residuals_and_mask(failure)
    if conf.shape != res.shape:
        raise ShapeMismatch(f"scores {conf.shape} and residuals {res.shape} do not align")
    conf, res = conf[mask], res[mask]
    if conf.shape[0] == 0:
        raise EmptyEvaluationSet("no samples left after masking")
    return conf, res


def _curve_from_arrays(conf: np.ndarray, res: np.ndarray) -> RiskCoverageCurve:
    n = conf.shape[0]
    order = np.argsort(conf, kind="stable")
    c = conf[order]
    r = res[order]
    total = int(r.sum())
    if n == 1:
        return RiskCoverageCurve(
            coverages=np.array([1.0]),
            risks=np.array([total / n]),
            weights=np.zeros(0),
        )
    # errors remaining after dropping samples 0..i of the sweep
    err_after = total - np.cumsum(r[: n - 1])
    rec = np.empty(n - 1, dtype=bool)
    rec[0] = True
    rec[1:] = c[1 : n - 1] != c[: n - 2]
    idxs = np.flatnonzero(rec)

    coverages = [1.0]
    risks = [total / n]
    coverages.extend((n - 1 - idxs) / n)
    risks.extend(err_after[idxs] / (n - 1 - idxs))
    weights = list(np.diff(idxs, prepend=-1) / n)

    trailing = (n - 2) - idxs[-1]
    if trailing > 0:
        coverages.append(0.0)
        risks.append(risks[-1])
        weights.append(trailing / n)
    return RiskCoverageCurve(
        coverages=np.asarray(coverages), risks=np.asarray(risks), weights=np.asarray(weights)
    )


def rc_curve(scores, failure) -> RiskCoverageCurve:
    """Risk-coverage curve of a confidence vector against failure labels."""
    conf, res = _masked(scores, failure)
    return _curve_from_arrays(conf, res)


def aurc(curve: RiskCoverageCurve) -> float:
    """Area under the risk-coverage curve, lower is better."""
    r = curve.risks
    return float(np.sum(curve.weights * (r[:-1] + r[1:]) * 0.5))


def _optimal_confidence(res: np.ndarray) -> np.ndarray:
    # distinct values, all failures strictly below all successes: the
    # empirical optimum of the sweep (a tied 0/1 oracle is not, because tie
    # groups merge trapezoids upward)
    n = res.shape[0]
    order = np.lexsort((np.arange(n), 1 - res))
    conf = np.empty(n)
    conf[order] = np.arange(n, dtype=np.float64)
    return conf


def e_aurc(curve: RiskCoverageCurve, failure, mode: str = "empirical") -> float:
    """Excess AURC over the best achievable ranking of the same residuals.

    mode "empirical" rebuilds the optimal curve through the same pipeline;
    the two closed forms replace it by +/- acc*ln(acc) at full-coverage
    accuracy (both signs circulate; kept for inspection).
    """
    value = aurc(curve)
    if mode == "empirical":
        res, mask = _residuals_and_mask(failure)
        res = res[mask]
        if res.shape[0] == 0:
            raise EmptyEvaluationSet("no samples left after masking")
        opt = _curve_from_arrays(_optimal_confidence(res), res)
        return value - aurc(opt)
    acc = 1.0 - float(curve.risks[0])
    term = acc * np.log(acc) if acc > 0 else 0.0
    if mode == "closed-form":
        return value + term
    if mode == "closed-form-neg":
        return value - term
    raise ValueError(f"unknown e-aurc mode {mode!r}")


def _rank_auroc(conf: np.ndarray, positive: np.ndarray) -> float:
    """Mann-Whitney AUROC with half credit per tied pair, via midranks."""
    n_pos = int(positive.sum())
    n_neg = positive.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels(f"need both outcomes, got {n_pos} positives / {n_neg} negatives")
    ranks = rankdata(conf, method="average")
    u = ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auroc_f(scores, failure) -> float:
    """Failure-detection AUROC: successes as positives, higher is better."""
    conf, res = _masked(scores, failure)
    return _rank_auroc(conf, res == 0)


def auroc_out(scores, outlier_labels, mask=None) -> float:
    """Outlier-detection AUROC with inliers as positives."""
    conf = _conf_array(scores)
    out = np.asarray(outlier_labels).astype(np.int64).reshape(-1)
    if conf.shape != out.shape:
        raise ShapeMismatch(f"scores {conf.shape} and outlier labels {out.shape} do not align")
    if mask is not None:
        keep = np.asarray(mask, dtype=bool)
        conf, out = conf[keep], out[keep]
    if conf.shape[0] == 0:
        raise EmptyEvaluationSet("no samples left after masking")
    return _rank_auroc(conf, out == 0)


def ap_f(scores, failure, positive: str = "success") -> float:
    """Step-interpolated average precision over descending score thresholds.

    positive="success" ranks retained-and-correct; positive="failure" scans
    ascending confidence instead (equivalently, descending negated scores) so
    that low confidence is treated as a failure alarm.
    """
    conf, res = _masked(scores, failure)
    if positive == "success":
        s, y = conf, res == 0
    elif positive == "failure":
        s, y = -conf, res == 1
    else:
        raise ValueError(f"positive must be 'success' or 'failure', got {positive!r}")
    n_pos = int(y.sum())
    if n_pos == 0:
        raise DegenerateLabels("no positive samples for average precision")
    order = np.argsort(-s, kind="stable")
    ss, ys = s[order], y[order]
    n = ss.shape[0]
    group_end = np.empty(n, dtype=bool)
    group_end[:-1] = ss[:-1] != ss[1:]
    group_end[-1] = True
    cum_tp = np.cumsum(ys)
    tp = cum_tp[group_end]
    pred = np.flatnonzero(group_end) + 1.0
    precision = tp / pred
    delta_tp = np.diff(tp, prepend=0.0)
    return float(np.sum(delta_tp * precision) / n_pos)


def accuracy(failure) -> float:
    """Fraction of correct predictions over all samples, mask ignored."""
    res, _ = _residuals_and_mask(failure)
    if res.shape[0] == 0:
        raise EmptyEvaluationSet("no samples")
    return float(np.mean(1 - res))


def nll(probabilities: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log likelihood of the true class, floored at 1e-300."""
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels).astype(np.int64).reshape(-1)
    if p.ndim != 2 or p.shape[0] != y.shape[0]:
        raise ShapeMismatch(f"probabilities {p.shape} and labels {y.shape} do not align")
    if p.shape[0] == 0:
        raise EmptyEvaluationSet("no samples")
    if (y < 0).any() or (y >= p.shape[1]).any():
        raise LabelOutOfRange("labels must lie in [0, c) for likelihood metrics")
    picked = np.maximum(p[np.arange(p.shape[0]), y], 1e-300)
    return float(-np.mean(np.log(picked)))


def brier(probabilities: np.ndarray, labels: np.ndarray) -> float:
    """Mean squared distance between the probability row and the one-hot truth."""
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels).astype(np.int64).reshape(-1)
    if p.ndim != 2 or p.shape[0] != y.shape[0]:
        raise ShapeMismatch(f"probabilities {p.shape} and labels {y.shape} do not align")
    if p.shape[0] == 0:
        raise EmptyEvaluationSet("no samples")
    if (y < 0).any() or (y >= p.shape[1]).any():
        raise LabelOutOfRange("labels must lie in [0, c) for likelihood metrics")
    onehot = np.zeros_like(p)
    onehot[np.arange(p.shape[0]), y] = 1.0
    return float(np.mean(np.sum((p - onehot) ** 2, axis=1)))
