"""capsim command-line interface.

One-process batch tool wiring traces, grids, policies, simulation, and
controller replay together.  All file outputs are written atomically
(temp file + rename); identical inputs and seed yield byte-identical
outputs.  Exit codes: 0 success, 1 validation/data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path

from . import controller as ctl
from . import policy, profile, sim, trace
from .errors import CapsimError, ValidationError

ENV_SEED = "CAPSIM_SEED"


def _atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _default_seed() -> int:
    return int(os.environ.get(ENV_SEED, "0"))


def _policy_from_args(args: argparse.Namespace) -> policy.PolicyKind:
    if args.policy == "sampling":
        return policy.sampling_policy(args.budget, args.rounds)
    return {
        "batching": policy.BATCHING,
        "multi-tenant": policy.MULTI_TENANT,
        "combination": policy.COMBINATION,
    }[args.policy]


def emit_plot_data(report: sim.SimReport, out: str | Path) -> None:
    """Write plot-ready series for a report: ``<out>.throughput.csv`` with
    (step, throughput) rows and ``<out>.cap.csv`` with (step, cap) rows.
    Throughput figures are conventionally drawn on a log10 Y axis; the hint
    rides along as a comment."""
    if report.steps is None:
        raise ValidationError("step records elided: re-run simulate without --summary-only")
    out = Path(out)
    thr = ["# y_scale=log10", "step,throughput_ips"]
    cap = ["step,cap_w"]
    for record in report.steps:
        thr.append(f"{record.step_index},{record.selection.throughput_ips:.6f}")
        cap.append(f"{record.step_index},{record.cap_w:.6f}")
    _atomic_write(out.with_name(out.name + ".throughput.csv"), "\n".join(thr) + "\n")
    _atomic_write(out.with_name(out.name + ".cap.csv"), "\n".join(cap) + "\n")


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_trace_stats(args: argparse.Namespace) -> int:
    tr = trace.load_trace(args.infile, args.step_seconds, gap_fill=args.gap_fill)
    stats = trace.trace_stats(tr)
    print(f"source={tr.source_label}")
    print(f"samples={len(tr)}")
    print(f"mean_w={stats.mean_w:.6f}")
    print(f"std_w={stats.std_w:.6f}")
    print(f"variation_pct={stats.variation_pct:.6f}")
    return 0


def _cmd_trace_normalize(args: argparse.Namespace) -> int:
    tr = trace.load_trace(args.infile, args.step_seconds, gap_fill=args.gap_fill)
    target = 100.0 if args.display else args.target_max
    normalized = trace.normalize_trace(tr, target)
    _atomic_write(args.out, trace.trace_csv_text(normalized))
    print(f"wrote {args.out} (max={max(normalized.values):.6f} W)")
    return 0


def _cmd_profile_synth(args: argparse.Namespace) -> int:
    params = profile.SynthParams(
        t_max_ips=args.t_max_ips,
        tau=args.tau,
        contention=args.contention,
        p_idle_w=args.p_idle_w,
        p_max_w=args.p_max_w,
        gamma=args.gamma,
        mem_model_mb=args.mem_model_mb,
        gpu_memory_mb=args.gpu_memory_mb,
        mtl_cap=args.mtl_cap,
        bs_cap=args.bs_cap,
        seed=args.seed if args.seed is not None else _default_seed(),
        noise_pct=args.noise_pct,
        model_name=args.model_name,
        gpu_name=args.gpu_name,
    )
    grid = profile.synthesize_grid(params)
    _atomic_write(args.out, profile.grid_csv_text(grid))
    print(f"wrote {args.out} ({len(grid)} configs)")
    return 0


def _cmd_profile_validate(args: argparse.Namespace) -> int:
    grid = profile.load_grid(args.infile)
    mtls = sorted({c.mtl for c in grid.entries})
    bss = sorted({c.bs for c in grid.entries})
    print(f"model={grid.model_name}")
    print(f"gpu={grid.gpu_name}")
    print(f"entries={len(grid)}")
    print(f"mtl_range={mtls[0]}..{mtls[-1]}")
    print(f"bs_range={bss[0]}..{bss[-1]}")
    print(f"power_kind={grid.power_kind}")
    print("ok")
    return 0


def _cmd_profile_cost(args: argparse.Namespace) -> int:
    seconds = profile.profiling_cost(args.mtl_max, args.bs_max, args.per_config_s)
    print(f"configs={args.mtl_max * args.bs_max}")
    print(f"seconds={seconds:.6f}")
    print(f"hours={seconds / 3600.0:.6f}")
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    grid = profile.load_grid(args.grid)
    tr = trace.load_trace(args.trace, args.step_seconds, gap_fill=args.gap_fill)
    kind = _policy_from_args(args)
    seed = args.seed if args.seed is not None else _default_seed()
    report = sim.simulate(grid, tr, kind, seed=seed, switch_penalty_s=args.switch_penalty_s)
    _atomic_write(args.out, sim.report_json_text(report, summary_only=args.summary_only))
    print(
        f"wrote {args.out} (policy={kind.label}, avg={report.avg_throughput_ips:.2f} ips, "
        f"idle_steps={report.idle_steps})"
    )
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    reports = [sim.load_report(p) for p in args.reports]
    table = sim.compare(reports)
    text = sim.comparison_csv_text(table)
    if args.out:
        _atomic_write(args.out, text)
        print(f"wrote {args.out} (best={table.best_policy})")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_controller_replay(args: argparse.Namespace) -> int:
    grid = profile.load_grid(args.grid)
    tr = trace.load_trace(args.trace, args.step_seconds, gap_fill=args.gap_fill)
    mode = ctl.REACTIVE if args.mode == "reactive" else ctl.proactive(args.window)
    seed = args.seed if args.seed is not None else _default_seed()
    report = ctl.replay(grid, tr, mode, noise_pct=args.noise_pct, seed=seed)
    if args.out:
        _atomic_write(args.out, ctl.event_log_csv_text(report))
        print(f"wrote {args.out}")
    print(f"mode={mode.tag.value}")
    print(f"violations={report.violations}")
    print(f"violation_fraction={report.violation_fraction:.6f}")
    print(f"reconfigs={report.reconfigs}")
    print(f"avg_throughput_ips={report.avg_throughput_ips:.6f}")
    return 0


def _cmd_emit_plot(args: argparse.Namespace) -> int:
    report = sim.load_report(args.report)
    emit_plot_data(report, args.out)
    print(f"wrote {args.out}.throughput.csv and {args.out}.cap.csv")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_trace_io(p: argparse.ArgumentParser) -> None:
    p.add_argument("--step-seconds", type=int, default=3600, help="trace step length (default 3600)")
    p.add_argument(
        "--gap-fill",
        action="store_true",
        help="forward-fill whole-step timestamp gaps instead of erroring",
    )


def _add_seed(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--seed",
        type=int,
        default=None,
        help=f"random seed (default: ${ENV_SEED} or 0)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capsim",
        description="Trace-driven simulator for power-capped DNN inference serving.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_trace = sub.add_parser("trace", help="power-trace utilities")
    trace_sub = p_trace.add_subparsers(dest="trace_command", required=True)

    p_stats = trace_sub.add_parser("stats", help="print mean/STD/variation of a trace")
    p_stats.add_argument("--in", dest="infile", required=True, help="trace CSV path")
    _add_trace_io(p_stats)
    p_stats.set_defaults(func=_cmd_trace_stats)

    p_norm = trace_sub.add_parser("normalize", help="rescale a trace to a target maximum")
    p_norm.add_argument("--in", dest="infile", required=True, help="trace CSV path")
    p_norm.add_argument("--out", required=True, help="output CSV path")
    group = p_norm.add_mutually_exclusive_group(required=True)
    group.add_argument("--target-max", type=float, help="new maximum in watts (e.g. GPU TDP)")
    group.add_argument("--display", action="store_true", help="normalize to the 0-100 display range")
    _add_trace_io(p_norm)
    p_norm.set_defaults(func=_cmd_trace_normalize)

    p_profile = sub.add_parser("profile", help="profiling-grid utilities")
    prof_sub = p_profile.add_subparsers(dest="profile_command", required=True)

    p_synth = prof_sub.add_parser("synth", help="generate a synthetic profiling grid")
    p_synth.add_argument("--out", required=True, help="output grid CSV path")
    p_synth.add_argument("--t-max-ips", type=float, default=10000.0, help="asymptotic throughput")
    p_synth.add_argument("--tau", type=float, default=64.0, help="saturation constant (work units)")
    p_synth.add_argument(
        "--contention", type=float, default=0.92, help="per-extra-instance factor in (0,1]"
    )
    p_synth.add_argument("--p-idle-w", type=float, default=60.0, help="idle power (W)")
    p_synth.add_argument("--p-max-w", type=float, default=350.0, help="TDP (W)")
    p_synth.add_argument("--gamma", type=float, default=0.8, help="power-curve exponent")
    p_synth.add_argument("--mem-model-mb", type=float, default=4096.0, help="model footprint (MB)")
    p_synth.add_argument("--gpu-memory-mb", type=float, default=24576.0, help="GPU memory (MB)")
    p_synth.add_argument("--mtl-cap", type=int, default=4, help="max co-located instances")
    p_synth.add_argument("--bs-cap", type=int, default=128, help="max batch size")
    p_synth.add_argument("--noise-pct", type=float, default=0.0, help="throughput noise, <= 2")
    p_synth.add_argument("--model-name", default="synthetic", help="model label for the grid")
    p_synth.add_argument("--gpu-name", default="synthetic-gpu", help="GPU label for the grid")
    _add_seed(p_synth)
    p_synth.set_defaults(func=_cmd_profile_synth)

    p_validate = prof_sub.add_parser("validate", help="load a grid and report its shape")
    p_validate.add_argument("--in", dest="infile", required=True, help="grid CSV path")
    p_validate.set_defaults(func=_cmd_profile_validate)

    p_cost = prof_sub.add_parser("cost", help="estimate exhaustive profiling time")
    p_cost.add_argument("--mtl-max", type=int, required=True, help="max instances profiled")
    p_cost.add_argument("--bs-max", type=int, required=True, help="max batch size profiled")
    p_cost.add_argument(
        "--per-config-s", type=float, default=60.0, help="seconds per configuration (default 60)"
    )
    p_cost.set_defaults(func=_cmd_profile_cost)

    p_sim = sub.add_parser("simulate", help="run one policy over a trace")
    p_sim.add_argument("--grid", required=True, help="profile grid CSV")
    p_sim.add_argument("--trace", required=True, help="power trace CSV")
    p_sim.add_argument(
        "--policy",
        required=True,
        choices=["batching", "multi-tenant", "combination", "sampling"],
        help="selection policy",
    )
    p_sim.add_argument("--budget", type=int, default=4, help="sampling: configs probed per step")
    p_sim.add_argument("--rounds", type=int, default=1, help="sampling: hill-climb rounds")
    p_sim.add_argument("--out", required=True, help="output report JSON path")
    p_sim.add_argument(
        "--summary-only", action="store_true", help="omit per-step records from the report"
    )
    p_sim.add_argument(
        "--switch-penalty-s",
        type=float,
        default=0.0,
        help="seconds of lost throughput per reconfiguration (default 0)",
    )
    _add_trace_io(p_sim)
    _add_seed(p_sim)
    p_sim.set_defaults(func=_cmd_simulate)

    p_cmp = sub.add_parser("compare", help="pairwise policy improvements from report JSONs")
    p_cmp.add_argument("--reports", nargs="+", required=True, help="two or more report JSON paths")
    p_cmp.add_argument("--out", help="output CSV path (default: print to stdout)")
    p_cmp.set_defaults(func=_cmd_compare)

    p_ctl = sub.add_parser("controller", help="online violation-handling replay")
    ctl_sub = p_ctl.add_subparsers(dest="controller_command", required=True)

    p_replay = ctl_sub.add_parser("replay", help="replay a cap stream through the controller")
    p_replay.add_argument("--grid", required=True, help="profile grid CSV")
    p_replay.add_argument("--trace", required=True, help="power trace CSV")
    p_replay.add_argument(
        "--mode", required=True, choices=["reactive", "proactive"], help="control mode"
    )
    p_replay.add_argument(
        "--window", type=int, default=3, help="proactive: cap-history window (default 3)"
    )
    p_replay.add_argument(
        "--noise-pct", type=float, default=0.0, help="measurement noise amplitude in percent"
    )
    p_replay.add_argument("--out", help="output event-log CSV path")
    _add_trace_io(p_replay)
    _add_seed(p_replay)
    p_replay.set_defaults(func=_cmd_controller_replay)

    p_plot = sub.add_parser("emit-plot", help="dump plot-ready series from a report JSON")
    p_plot.add_argument("--report", required=True, help="report JSON path")
    p_plot.add_argument("--out", required=True, help="output prefix for the series files")
    p_plot.set_defaults(func=_cmd_emit_plot)

    return parser


def run(argv: list[str] | None = None) -> int:
    """Parse argv and execute one subcommand; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles --help and usage errors
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (CapsimError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
