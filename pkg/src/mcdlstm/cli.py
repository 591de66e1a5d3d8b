"""Command-line interface.

Subcommands: ``detect`` (anomaly detection run), ``classify`` (classification
run), ``estimate`` (resource/latency report for one configuration) and ``dse``
(lookup-table optimization).  Exit codes: 0 success, 2 validation error,
3 infeasible or no candidate.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import datakit, dse, hwmodel
from .engine import Arch

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3

DEFAULT_SEQ_LEN = 140


def _parse_arch(text: str) -> Arch:
    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError(f"--arch expects H,NL,B (got {text!r})")
    return Arch(int(parts[0]), int(parts[1]), parts[2].strip())


def _parse_reuse(text: str) -> tuple[int, int, int | None]:
    parts = [int(p) for p in text.split(",")]
    if len(parts) == 2:
        return parts[0], parts[1], None
    if len(parts) == 3:
        return parts[0], parts[1], parts[2]
    raise ValueError(f"--reuse expects RX,RH or RX,RH,RD (got {text!r})")


def _parse_min(pairs: list[str]) -> dict[str, float]:
    out = {}
    for pair in pairs:
        name, _, value = pair.partition("=")
        if not value:
            raise ValueError(f"--min expects metric=threshold (got {pair!r})")
        out[name.strip()] = float(value)
    return out


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcdlstm",
        description="Bit-accurate Bayesian-LSTM accelerator model and design explorer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    detect = sub.add_parser("detect", help="anomaly detection on a UCR dataset")
    detect.add_argument("--weights", required=True)
    detect.add_argument("--data", required=True)
    detect.add_argument("--samples", type=int, default=30)
    detect.add_argument("--seed", type=int, default=42)
    detect.add_argument("--report", default=None, help="write the report as JSON here")

    classify = sub.add_parser("classify", help="classification on a UCR dataset")
    classify.add_argument("--weights", required=True)
    classify.add_argument("--data", required=True)
    classify.add_argument("--samples", type=int, default=30)
    classify.add_argument("--seed", type=int, default=42)
    classify.add_argument("--entropy-probe", action="store_true")

    estimate = sub.add_parser("estimate", help="resource/latency estimate for one design")
    estimate.add_argument("--arch", required=True, help="H,NL,B")
    estimate.add_argument("--task", required=True, choices=("autoencoder", "classifier"))
    estimate.add_argument("--reuse", required=True, help="RX,RH[,RD]")
    estimate.add_argument("--dsp-total", type=int, required=True)
    estimate.add_argument("--clock", type=float, default=1e8)
    estimate.add_argument("--calibration", default=None)

    dse_cmd = sub.add_parser("dse", help="optimize over a benchmarked lookup table")
    dse_cmd.add_argument("--table", required=True)
    dse_cmd.add_argument("--mode", required=True, choices=sorted(dse.MODES))
    dse_cmd.add_argument("--dsp-total", type=int, required=True)
    dse_cmd.add_argument("--min", action="append", default=[], metavar="metric=thr")
    dse_cmd.add_argument("--task", default=None, choices=("autoencoder", "classifier"))
    return parser


def _print_eval_report(report: dict, path: str | None) -> None:
    for key, value in report.items():
        print(f"{key}={value:.6g}" if isinstance(value, float) else f"{key}={value}")
    if path:
        Path(path).write_text(json.dumps(report, indent=2) + "\n")


def _cmd_detect(args) -> int:
    net = datakit.load_weights(args.weights)
    dataset = datakit.load_ucr(args.data)
    report = datakit.anomaly_pipeline(net, dataset, samples=args.samples, seed=args.seed)
    _print_eval_report(report, args.report)
    return EXIT_OK


def _cmd_classify(args) -> int:
    net = datakit.load_weights(args.weights)
    dataset = datakit.load_ucr(args.data)
    report = datakit.classify_pipeline(
        net, dataset, samples=args.samples, seed=args.seed, probe=args.entropy_probe
    )
    _print_eval_report(report, None)
    return EXIT_OK


def _cmd_estimate(args) -> int:
    arch = _parse_arch(args.arch)
    r_x, r_h, r_d = _parse_reuse(args.reuse)
    if r_d is None:
        r_d = r_x if args.task == "autoencoder" else 1
    calibration = hwmodel.load_calibration(args.calibration) if args.calibration else {}
    hw = hwmodel.HwConfig(
        r_x=r_x,
        r_h=r_h,
        r_d=r_d,
        dsp_total=args.dsp_total,
        clock_hz=args.clock,
        calibration=calibration,
    )
    report = hwmodel.cost_report(arch, args.task, DEFAULT_SEQ_LEN, hw)
    print(f"arch {arch} task={args.task} T={DEFAULT_SEQ_LEN}")
    print(f"dsp_per_layer={list(report.dsp_per_layer)} dsp_dense={report.dsp_dense}")
    print(
        f"dsp_design={report.dsp_design} budget={hwmodel.dsp_budget(args.dsp_total)} "
        f"feasible={report.feasible}"
    )
    print(f"ii={report.ii} il_per_layer={list(report.il_per_layer)}")
    print(
        f"latency_cycles={report.latency_cycles} "
        f"latency_ms={report.latency_seconds * 1e3:.6f}"
    )
    if not report.feasible:
        return EXIT_INFEASIBLE
    return EXIT_OK


def _cmd_dse(args) -> int:
    table = dse.load_lookup_table(args.table)
    request = dse.OptimizationRequest(
        mode=args.mode,
        dsp_total=args.dsp_total,
        min_requirements=_parse_min(args.min),
        task=args.task,
    )
    selected = dse.optimize(request, table)
    print(dse.format_report(selected, request))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    handlers = {
        "detect": _cmd_detect,
        "classify": _cmd_classify,
        "estimate": _cmd_estimate,
        "dse": _cmd_dse,
    }
    try:
        return handlers[args.command](args)
    except (dse.NoFeasibleArchitecture, dse.InfeasibleDesign) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
