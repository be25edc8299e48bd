"""Command-line interface.

Subcommands: simulate, fit, eval, verify-assumption, experiment, export.
Exit codes: 0 success, 1 usage or input error, 2 numerical or divergence
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness
from .control import load_trace, save_trace
from .gpr import ConfidenceParams, NumericalError, SquaredExponentialKernel
from .surface import (
    Batch,
    DiscrepancyParams,
    fit_online,
    load_sar_model,
    save_sar_model,
    verify_assumption,
)
from .sysmodel import DivergenceError


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    parser.add_argument("--out-dir", default=".", help="output directory (default .)")
    parser.add_argument("--json", action="store_true", help="machine-readable output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskbound",
        description="Risk-aware disturbance-norm bounds: fit, evaluate, deploy.",
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("simulate", help="run one scenario phase, write a trace")
    _common(p)
    p.add_argument("--config", required=True, help="scenario file or builtin name")
    p.add_argument("--phase", choices=["baseline", "augmented"], default="baseline")
    p.add_argument("--model", help="fitted surface JSON (required for augmented)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a surface from a recorded trace")
    _common(p)
    p.add_argument("--trace", required=True, help="run trace (JSON lines)")
    p.add_argument("--n", type=int, default=60, help="samples per batch (default 60)")
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--alpha", type=float, default=3.0)
    p.add_argument("--beta", type=float, default=0.05)
    p.add_argument("--length-scale", type=float, default=1.0)
    p.add_argument("--signal-variance", type=float, default=1.0)
    p.add_argument("--rkhs-bound", type=float, default=1.0)
    p.add_argument("--sigma-mode", choices=["variance", "stddev"], default="variance")
    p.add_argument("--policy", choices=["warn", "abort"], default="warn")
    p.add_argument("--target-state", choices=["last", "argmax"], default="last")
    p.add_argument("--out", help="model output path (default <out-dir>/sar_model.json)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="coverage of a surface vs Monte Carlo truth")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--scenario", "--config", dest="scenario", required=True)
    p.add_argument("--grid", type=int, default=20, help="grid points per axis")
    p.add_argument("--samples", type=int, default=500, help="MC samples per grid point")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify-assumption", help="per-batch alpha_D/beta_D table")
    _common(p)
    p.add_argument("--trace", required=True)
    p.add_argument("--n", type=int, default=60)
    p.add_argument("--alpha", type=float, default=3.0)
    p.add_argument("--beta", type=float, default=0.05)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("experiment", help="full two-phase protocol with report")
    _common(p)
    p.add_argument("--config", required=True, help="scenario file or builtin name")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("export", help="write plot-ready CSV files")
    _common(p)
    p.add_argument(
        "--kind",
        required=True,
        choices=["surface-slice", "sar-vs-samples", "course-3d", "batch-diagnostics"],
    )
    p.add_argument("--model", help="surface JSON (surface-slice, batch-diagnostics)")
    p.add_argument("--trace", help="run trace (course-3d)")
    p.add_argument("--paths", type=int, default=1000, help="fixture paths (sar-vs-samples)")
    p.add_argument("--grid", type=int, default=40)
    p.add_argument("--height", type=float)
    p.set_defaults(func=cmd_export)

    return parser


def _trace_batches(trace, n: int):
    records = trace.records()
    for i in range(len(records) // n):
        yield Batch(tuple(records[i * n : (i + 1) * n]), batch_index=i)


def cmd_simulate(args) -> int:
    scenario = harness.resolve_scenario(args.config)
    sar = load_sar_model(args.model) if args.model else None
    if args.phase == "augmented" and sar is None:
        print("error: --phase augmented requires --model", file=sys.stderr)
        return 1
    trace, metrics = harness.simulate_phase(scenario, args.seed, args.phase, sar)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace_path = out / f"trace_{scenario.label}_{args.phase}_seed{args.seed}.jsonl"
    save_trace(trace, trace_path)
    metrics_path = out / f"metrics_{scenario.label}_{args.phase}_seed{args.seed}.json"
    metrics_path.write_text(json.dumps(metrics.to_dict(), indent=2, sort_keys=True))
    if args.json:
        print(json.dumps({"trace": str(trace_path), **metrics.to_dict()}, sort_keys=True))
    else:
        print(
            f"{scenario.label} {args.phase}: {metrics.total_seconds:.2f} s, "
            f"{metrics.total_steps} steps, completed={metrics.completed} "
            f"-> {trace_path}"
        )
    return 0


def cmd_fit(args) -> int:
    trace = load_trace(args.trace)
    model = fit_online(
        trace.records(),
        DiscrepancyParams(args.alpha, args.beta),
        args.eps,
        args.n,
        SquaredExponentialKernel(args.length_scale, args.signal_variance),
        ConfidenceParams(args.rkhs_bound, 0.0, sigma_mode=args.sigma_mode),
        policy=args.policy,
        target_state=args.target_state,
    )
    out = Path(args.out) if args.out else Path(args.out_dir) / "sar_model.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_sar_model(model, out)
    if args.json:
        print(
            json.dumps(
                {
                    "model": str(out),
                    "iterations": model.iterations,
                    "joint_confidence": model.joint_confidence,
                },
                sort_keys=True,
            )
        )
    else:
        print(
            f"fitted {model.iterations} batch points "
            f"(joint confidence {model.joint_confidence:.4f}) -> {out}"
        )
    return 0


def cmd_eval(args) -> int:
    model = load_sar_model(args.model)
    scenario = harness.resolve_scenario(args.scenario)
    report = harness.scenario_coverage(scenario, model, args.seed, args.grid, args.samples)
    if args.json:
        print(json.dumps(report.to_dict(), sort_keys=True))
    else:
        print(
            f"coverage {report.coverage:.3f} over {report.n_points} grid points, "
            f"mean slack {report.mean_slack:.4f}"
        )
    return 0


def cmd_verify(args) -> int:
    trace = load_trace(args.trace)
    params = DiscrepancyParams(args.alpha, args.beta)
    rows = [verify_assumption(b, params) for b in _trace_batches(trace, args.n)]
    if not rows:
        print("no complete batches in trace", file=sys.stderr)
        return 1
    if args.json:
        print(json.dumps([d.to_dict() for d in rows], sort_keys=True))
        return 0
    print(f"{'batch':>5}  {'alpha_D':>9}  {'beta_D':>9}  {'alpha_ok':>8}  {'beta_ok':>7}")
    for d in rows:
        print(
            f"{d.batch_index:>5}  {d.alpha_d:>9.4f}  {d.beta_d:>9.4f}  "
            f"{str(d.alpha_ok):>8}  {str(d.beta_ok):>7}"
        )
    print(
        f"assumed: alpha={params.alpha:g}, beta={params.beta:g}; "
        f"worst: alpha_D={max(d.alpha_d for d in rows):.4f}, "
        f"beta_D={max(d.beta_d for d in rows):.4f}"
    )
    return 0


def cmd_experiment(args) -> int:
    report = harness.run_experiment(args.config, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / f"report_{report.label}_seed{args.seed}.json"
    harness.save_report(report, report_path)
    harness.export_plot_data(report, "batch-diagnostics", out)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        speedup = "n/a" if report.mean_speedup is None else f"{report.mean_speedup:.2f}x"
        print(
            f"{report.label}: phase1 {report.phase1_seconds:.2f} s, "
            f"{report.iterations} batches, mean speedup {speedup}, "
            f"coverage {report.coverage.coverage:.2f} -> {report_path}"
        )
    return 0


def cmd_export(args) -> int:
    out = Path(args.out_dir)
    if args.kind == "surface-slice":
        if not args.model:
            print("error: surface-slice requires --model", file=sys.stderr)
            return 1
        model = load_sar_model(args.model)
        written = harness.export_plot_data(
            model, args.kind, out, grid_n=args.grid, height=args.height
        )
    elif args.kind == "batch-diagnostics":
        if not args.model:
            print("error: batch-diagnostics requires --model", file=sys.stderr)
            return 1
        written = harness.export_plot_data(load_sar_model(args.model), args.kind, out)
    elif args.kind == "course-3d":
        if not args.trace:
            print("error: course-3d requires --trace", file=sys.stderr)
            return 1
        written = harness.export_plot_data(load_trace(args.trace), args.kind, out)
    else:  # sar-vs-samples
        fixtures = harness.figure2_fixture(n_paths=args.paths, seed=args.seed)
        written = harness.export_plot_data(fixtures, args.kind, out)
    for path in written:
        print(path)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    if not hasattr(args, "func"):
        parser.print_help()
        return 1
    try:
        return args.func(args)
    except (DivergenceError, NumericalError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
