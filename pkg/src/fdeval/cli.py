"""Command-line entry point.

Subcommands: score, evaluate, rc-curve, sgr, calibrate, precision-audit,
verify. Exit codes: 0 success, 1 library error (bad data, degenerate inputs),
2 configuration or usage error. All artifacts are byte-deterministic for
identical inputs. FDSHIFT_SEED selects the seed for synthetic fixtures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .core import ALL_TAGS, STANDARD, failure_labels, load_bundle
from .errors import FdevalError, InvalidParameter
from .metrics import aurc, auroc_f, rc_curve
from .oracle import aurc_oracle, auroc_oracle
from .precision_audit import audit, synthesize_highconf_bundle
from .protocol import (
    DEFAULT_METRICS,
    MetricReport,
    StudySpec,
    rank_table,
    run_study,
)
from .reporting import (
    AURC_SCALE,
    curve_csv_text,
    fmt_float,
    render_rc_svg,
    report_csv_text,
    report_json_obj,
    safe_name,
    write_json,
)
from .risk_control import ece, platt_apply, platt_fit, sgr_select
from .scores import CSF_IDS, EXTERNAL_PREFIX, MLS, MSR, PE, PRECISIONS, SoftmaxConfig, compute_csf

ENV_SEED = "FDSHIFT_SEED"
EMIT_KINDS = ("json", "csv", "svg")
CONFIG_KEYS = {"bundle", "out", "precision", "temperature", "csfs", "studies", "emit", "ece_bins"}


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    bundle: str | None
    out: Path
    softmax: SoftmaxConfig
    csfs: list[str]
    studies: list[StudySpec]
    emit: list[str]
    ece_bins: int


def _sci(v: float) -> str:
    mant, exp = f"{float(v):.1e}".split("e")
    return f"{mant}e{int(exp)}"


def _env_seed() -> int:
    raw = os.environ.get(ENV_SEED, "0")
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{ENV_SEED} must be an integer, got {raw!r}")


def _valid_csf(name: str) -> str:
    if name in CSF_IDS or (name.startswith(EXTERNAL_PREFIX) and len(name) > len(EXTERNAL_PREFIX)):
        return name
    raise ConfigError(f"unknown CSF {name!r}; expected one of {CSF_IDS} or '{EXTERNAL_PREFIX}<name>'")


def build_run_config(args) -> RunConfig:
    data = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file {path} not found")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: {exc}")
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(data) - CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    bundle = getattr(args, "bundle", None) or data.get("bundle")
    out = Path(getattr(args, "out", None) or data.get("out") or "out")
    precision = getattr(args, "precision", None) or data.get("precision") or "f64"
    temperature = getattr(args, "temperature", None)
    if temperature is None:
        temperature = data.get("temperature", 1.0)
    try:
        softmax_cfg = SoftmaxConfig(precision=precision, temperature=float(temperature))
    except (InvalidParameter, TypeError, ValueError) as exc:
        raise ConfigError(str(exc))

    csfs = [_valid_csf(str(c)) for c in data.get("csfs", [MSR, PE])]

    studies = []
    for entry in data.get("studies", []):
        if not isinstance(entry, dict):
            raise ConfigError(f"study entries must be objects, got {entry!r}")
        try:
            studies.append(
                StudySpec(
                    name=str(entry.get("name", "")),
                    kind=str(entry.get("kind", STANDARD)),
                    shift_filter=tuple(entry.get("shift_filter", ALL_TAGS)),
                    metrics=tuple(entry.get("metrics", DEFAULT_METRICS)),
                )
            )
        except InvalidParameter as exc:
            raise ConfigError(str(exc))

    emit = data.get("emit", ["json", "csv"])
    if getattr(args, "emit", None):
        emit = [e for e in args.emit.split(",") if e]
    for e in emit:
        if e not in EMIT_KINDS:
            raise ConfigError(f"unknown emit kind {e!r}; expected subset of {EMIT_KINDS}")

    ece_bins = int(data.get("ece_bins", 15))
    return RunConfig(
        bundle=bundle,
        out=out,
        softmax=softmax_cfg,
        csfs=csfs,
        studies=studies,
        emit=list(emit),
        ece_bins=ece_bins,
    )


def _require_bundle(rc: RunConfig):
    if not rc.bundle:
        raise ConfigError("--bundle is required for this command")
    return load_bundle(rc.bundle)


def _default_studies(bundle) -> list[StudySpec]:
    present = tuple(t for t in ALL_TAGS if t in set(bundle.shift_tags.tolist()))
    return [StudySpec(name="standard", kind=STANDARD, shift_filter=present, metrics=DEFAULT_METRICS)]


def cmd_score(rc: RunConfig, args) -> int:
    bundle = _require_bundle(rc)
    vec = compute_csf(bundle, args.csf, rc.softmax)
    rc.out.mkdir(parents=True, exist_ok=True)
    path = write_json(
        rc.out / f"scores_{safe_name(args.csf)}.json",
        {
            "csf": vec.csf_id,
            "precision": vec.precision_mode,
            "temperature": rc.softmax.temperature,
            "n": int(vec.scores.shape[0]),
            "scores": [float(v) for v in vec.scores],
        },
    )
    print(f"wrote {path}")
    return 0


def cmd_evaluate(rc: RunConfig, args) -> int:
    bundle = _require_bundle(rc)
    studies = rc.studies or _default_studies(bundle)
    report = MetricReport()
    for spec in studies:
        report.merge(run_study(bundle, spec, rc.csfs, rc.softmax, ece_bins=rc.ece_bins))
    rank_table(report)

    rc.out.mkdir(parents=True, exist_ok=True)
    written = []
    if "json" in rc.emit:
        written.append(write_json(rc.out / "report.json", report_json_obj(report)))
    if "csv" in rc.emit:
        path = rc.out / "report.csv"
        path.write_text(report_csv_text(report))
        written.append(path)
    if "svg" in rc.emit:
        for spec in studies:
            keep = np.isin(bundle.shift_tags, list(spec.shift_filter))
            sub = bundle.select(keep)
            fl = failure_labels(sub, spec.kind)
            for csf in rc.csfs:
                vec = compute_csf(sub, csf, rc.softmax)
                curve = rc_curve(vec, fl)
                path = rc.out / f"rc_{safe_name(spec.name)}_{safe_name(csf)}.svg"
                path.write_text(render_rc_svg(curve, spec.name, csf))
                written.append(path)
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_rc_curve(rc: RunConfig, args) -> int:
    bundle = _require_bundle(rc)
    fl = failure_labels(bundle, STANDARD)
    vec = compute_csf(bundle, args.csf, rc.softmax)
    curve = rc_curve(vec, fl)
    rc.out.mkdir(parents=True, exist_ok=True)
    value = aurc(curve)
    csv_path = rc.out / "rc_curve.csv"
    csv_path.write_text(curve_csv_text(curve))
    json_path = write_json(
        rc.out / "rc_curve.json",
        {
            "csf": args.csf,
            "coverages": [float(v) for v in curve.coverages],
            "risks": [float(v) for v in curve.risks],
            "weights": [float(v) for v in curve.weights],
            "aurc": value * AURC_SCALE,
            "aurc_raw": value,
        },
    )
    print(f"wrote {csv_path}")
    print(f"wrote {json_path}")
    return 0


def cmd_sgr(rc: RunConfig, args) -> int:
    bundle = _require_bundle(rc)
    fl = failure_labels(bundle, STANDARD)
    vec = compute_csf(bundle, args.csf, rc.softmax)
    result = sgr_select(vec, fl.residuals, r_star=args.rstar, delta=args.delta)
    rc.out.mkdir(parents=True, exist_ok=True)
    obj = {"csf": args.csf}
    obj.update(asdict(result))
    path = write_json(rc.out / "sgr.json", obj)
    print(f"wrote {path}")
    return 0


def cmd_calibrate(rc: RunConfig, args) -> int:
    bundle = _require_bundle(rc)
    fl = failure_labels(bundle, STANDARD)
    vec = compute_csf(bundle, args.csf, rc.softmax)
    model = platt_fit(vec, fl.residuals, prior_smoothing=args.smoothing)
    calibrated = platt_apply(model, vec)
    value = ece(calibrated, fl.residuals, bins=args.bins)
    rc.out.mkdir(parents=True, exist_ok=True)
    path = write_json(
        rc.out / "calibration.json",
        {
            "csf": args.csf,
            "a": model.a,
            "b": model.b,
            "n_iter": model.n_iter,
            "bins": args.bins,
            "smoothing": bool(args.smoothing),
            "ece": value,
        },
    )
    print(f"wrote {path}")
    return 0


def cmd_precision_audit(rc: RunConfig, args) -> int:
    if args.synthetic:
        seed = _env_seed()
        bundle, residuals = synthesize_highconf_bundle(
            n=args.n,
            c=args.c,
            failure_rate=args.failure_rate,
            gap_low=args.gap_low,
            gap_high=args.gap_high,
            seed=seed,
        )
        source = {"source": "synthetic", "n": args.n, "c": args.c, "failure_rate": args.failure_rate,
                  "gap_low": args.gap_low, "gap_high": args.gap_high, "seed": seed}
    else:
        bundle = _require_bundle(rc)
        residuals = failure_labels(bundle, STANDARD).residuals
        source = {"source": "bundle"}
    report = audit(
        bundle,
        residuals,
        PRECISIONS,
        temperature=rc.softmax.temperature,
        quantize_storage=not args.compute_only,
    )
    rc.out.mkdir(parents=True, exist_ok=True)
    obj = {
        "precisions": report.precisions,
        "round_to_one_rate": report.round_to_one_rate,
        "aurc": {p: v * AURC_SCALE for p, v in report.aurc.items()},
        "aurc_raw": report.aurc,
        "auroc_f": report.auroc_f,
        "accuracy": report.accuracy,
        "temperature": rc.softmax.temperature,
        "quantize_storage": not args.compute_only,
    }
    obj.update(source)
    json_path = write_json(rc.out / "precision_audit.json", obj)
    lines = ["precision,round_to_one_rate,aurc,auroc_f,accuracy"]
    for p in report.precisions:
        lines.append(
            f"{p},{fmt_float(report.round_to_one_rate[p])},{fmt_float(report.aurc[p] * AURC_SCALE)},"
            f"{fmt_float(report.auroc_f[p])},{fmt_float(report.accuracy[p])}"
        )
    csv_path = rc.out / "precision_audit.csv"
    csv_path.write_text("\n".join(lines) + "\n")
    print(f"wrote {json_path}")
    print(f"wrote {csv_path}")
    return 0


def cmd_verify(rc: RunConfig, args) -> int:
    bundle = _require_bundle(rc)
    fl = failure_labels(bundle, STANDARD)
    csfs = args.csf or [MSR, PE, MLS]
    aurc_dev = 0.0
    auroc_dev = 0.0
    for csf in csfs:
        vec = compute_csf(bundle, csf, rc.softmax)
        fast = aurc(rc_curve(vec, fl))
        ref = aurc_oracle(vec.scores, fl.residuals, fl.eval_mask)
        aurc_dev = max(aurc_dev, abs(fast - ref))
        conf = vec.scores[fl.eval_mask]
        res = fl.residuals[fl.eval_mask]
        fast_roc = auroc_f(vec, fl)
        ref_roc = auroc_oracle(conf, res == 0)
        auroc_dev = max(auroc_dev, abs(fast_roc - ref_roc))
    print(f"csfs={','.join(csfs)}")
    print(f"aurc_max_dev={_sci(aurc_dev)}")
    print(f"auroc_max_dev={_sci(auroc_dev)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--bundle", help="bundle directory")
    common.add_argument("--out", help="output directory (default: out)")
    common.add_argument("--precision", choices=PRECISIONS, help="softmax arithmetic precision (default: f64)")
    common.add_argument("--temperature", type=float, help="temperature dividing logits before softmax (default: 1)")
    common.add_argument("--config", help="JSON run configuration file")

    parser = argparse.ArgumentParser(prog="fdeval", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("score", parents=[common], help="compute one confidence score vector")
    p.add_argument("--csf", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", parents=[common], help="run the configured studies and emit reports")
    p.add_argument("--emit", help="comma list from json,csv,svg (default json,csv)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("rc-curve", parents=[common], help="risk-coverage curve for one CSF")
    p.add_argument("--csf", default=MSR)
    p.set_defaults(func=cmd_rc_curve)

    p = sub.add_parser("sgr", parents=[common], help="risk-guaranteed threshold selection")
    p.add_argument("--csf", default=MSR)
    p.add_argument("--rstar", type=float, default=0.15)
    p.add_argument("--delta", type=float, default=0.1)
    p.set_defaults(func=cmd_sgr)

    p = sub.add_parser("calibrate", parents=[common], help="Platt-scale a CSF and report ECE")
    p.add_argument("--csf", default=MSR)
    p.add_argument("--bins", type=int, default=15)
    p.add_argument("--smoothing", action="store_true", help="prior-count target smoothing")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("precision-audit", parents=[common], help="softmax ranking audit across precisions")
    p.add_argument("--synthetic", action="store_true", help="audit a seeded synthetic bundle instead of --bundle")
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--c", type=int, default=10)
    p.add_argument("--failure-rate", type=float, default=0.3)
    p.add_argument("--gap-low", type=float, default=20.0)
    p.add_argument("--gap-high", type=float, default=40.0)
    p.add_argument("--compute-only", action="store_true", help="keep f64 storage, reduce arithmetic only")
    p.set_defaults(func=cmd_precision_audit)

    p = sub.add_parser("verify", parents=[common], help="cross-check fast metrics against the oracles")
    p.add_argument("--csf", action="append", help="CSF to verify (repeatable; default msr, pe, mls)")
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    if not getattr(args, "func", None):
        parser.print_help()
        return 2
    try:
        rc = build_run_config(args)
        return args.func(rc, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FdevalError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
