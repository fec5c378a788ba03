"""Deterministic report emission: JSON, long-format CSV, and SVG curves.

Byte-identical output for identical inputs is a contract: keys are sorted,
floats go through one shared 12-significant-digit formatter, newlines are
always "\\n", and nothing environment-dependent (timestamps, hostnames,
locale) is ever written. The SVG renderer is hand-rolled for the same reason.
"""

from __future__ import annotations

import json
from pathlib import Path

from .metrics import RiskCoverageCurve
from .protocol import MetricReport

AURC_SCALE = 1000.0  # tables display AURC x 1000; JSON keeps the raw value too


def fmt_float(v: float) -> str:
    return format(float(v), ".12g")


def round12(v: float) -> float:
    return float(fmt_float(v))


def _round_tree(obj):
    if isinstance(obj, float):
        return round12(obj)
    if isinstance(obj, dict):
        return {k: _round_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_tree(v) for v in obj]
    return obj


def write_json(path: str | Path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_round_tree(obj), sort_keys=True, indent=2) + "\n")
    return path


def report_json_obj(report: MetricReport) -> dict:
    studies: dict = {}
    for (study, csf, metric), value in report.values.items():
        entry = studies.setdefault(study, {"csfs": {}, "ranks": {}, "info": {}})
        row = entry["csfs"].setdefault(csf, {})
        if metric == "aurc":
            row["aurc"] = value * AURC_SCALE
            row["aurc_raw"] = value
        else:
            row[metric] = value
    for (study, metric), ranks in report.ranks.items():
        if study in studies:
            studies[study]["ranks"][metric] = dict(ranks)
    for study, info in report.study_info.items():
        if study in studies:
            studies[study]["info"] = dict(info)
    return {"studies": studies}


def report_csv_text(report: MetricReport) -> str:
    lines = ["study,csf,metric,value,rank"]
    for (study, csf, metric) in sorted(report.values, key=lambda k: (k[0], k[2], k[1])):
        value = report.values[(study, csf, metric)]
        if metric == "aurc":
            value = value * AURC_SCALE
        rank = report.ranks.get((study, metric), {}).get(csf, "")
        lines.append(f"{study},{csf},{metric},{fmt_float(value)},{rank}")
    return "\n".join(lines) + "\n"


def curve_csv_text(curve: RiskCoverageCurve) -> str:
    lines = ["coverage,risk"]
    for cov, risk in zip(curve.coverages, curve.risks):
        lines.append(f"{fmt_float(cov)},{fmt_float(risk)}")
    return "\n".join(lines) + "\n"


def safe_name(name: str) -> str:
    return "".join(ch if (ch.isalnum() or ch in "._-") else "-" for ch in name)


def render_rc_svg(curve: RiskCoverageCurve, study: str, csf: str) -> str:
    """Static stepped risk-coverage plot on fixed [0,1] x [0,1] axes."""
    left, right, top, bottom = 60.0, 440.0, 20.0, 320.0

    def x(cov: float) -> str:
        return format(left + (right - left) * cov, ".2f")

    def y(risk: float) -> str:
        return format(bottom - (bottom - top) * risk, ".2f")

    covs = list(map(float, curve.coverages))
    risks = list(map(float, curve.risks))
    d = [f"M {x(covs[0])},{y(risks[0])}"]
    for k in range(1, len(covs)):
        d.append(f"L {x(covs[k])},{y(risks[k - 1])}")
        d.append(f"L {x(covs[k])},{y(risks[k])}")
    path = " ".join(d)

    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="480" height="360" viewBox="0 0 480 360">',
        '<rect x="0" y="0" width="480" height="360" fill="#ffffff"/>',
    ]
    for i in range(5):
        t = i / 4.0
        gx, gy = x(t), y(t)
        parts.append(f'<line x1="{gx}" y1="{y(0.0)}" x2="{gx}" y2="{y(1.0)}" stroke="#e0e0e0" stroke-width="1"/>')
        parts.append(f'<line x1="{x(0.0)}" y1="{gy}" x2="{x(1.0)}" y2="{gy}" stroke="#e0e0e0" stroke-width="1"/>')
        label = format(t, ".2f")
        parts.append(f'<text x="{gx}" y="338" font-family="monospace" font-size="10" text-anchor="middle">{label}</text>')
        parts.append(f'<text x="52" y="{gy}" font-family="monospace" font-size="10" text-anchor="end">{label}</text>')
    parts.append(f'<line x1="{x(0.0)}" y1="{y(0.0)}" x2="{x(1.0)}" y2="{y(0.0)}" stroke="#333333" stroke-width="1.5"/>')
    parts.append(f'<line x1="{x(0.0)}" y1="{y(0.0)}" x2="{x(0.0)}" y2="{y(1.0)}" stroke="#333333" stroke-width="1.5"/>')
    parts.append(f'<path d="{path}" fill="none" stroke="#2a6f97" stroke-width="1.5"/>')
    parts.append(f'<text x="250" y="14" font-family="monospace" font-size="12" text-anchor="middle">{safe_name(study)} / {safe_name(csf)}</text>')
    parts.append('<text x="250" y="354" font-family="monospace" font-size="11" text-anchor="middle">coverage</text>')
    parts.append('<text x="14" y="170" font-family="monospace" font-size="11" text-anchor="middle" transform="rotate(-90 14 170)">selective risk</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
