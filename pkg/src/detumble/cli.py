"""Command-line interface: run, compare, plot.

Exit codes: 0 success, 1 usage or configuration error, 2 simulation abort
(the partial trace is still written).
"""

import argparse
import json
import os
import sys

from .cgmres import InitializationError
from .config import CONTROLLERS, ConfigError, load_config, parse_config
from .plotsvg import PLOT_KINDS, render_plot
from .simulate import SimulationAborted, run_scenario
from .traceio import metrics_to_dict, read_trace, write_metrics, write_trace


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="detumble",
        description="Satellite detumbling simulator: B-dot and predictive control "
                    "with a single-axis magnetorquer.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one closed-loop scenario")
    run_p.add_argument("--config", required=True, help="scenario JSON file")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config key (dotted path)")

    cmp_p = sub.add_parser("compare", help="run two controllers on the same scenario")
    cmp_p.add_argument("--config", required=True)
    cmp_p.add_argument("--out", required=True)
    cmp_p.add_argument("--controllers", nargs=2, default=["bdot-x", "mpc"],
                       metavar=("A", "B"), help="the two controllers to compare")
    cmp_p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE")

    plot_p = sub.add_parser("plot", help="render a static SVG from a trace CSV")
    plot_p.add_argument("--trace", required=True, help="trace.csv produced by run")
    plot_p.add_argument("--kind", required=True, choices=PLOT_KINDS)
    plot_p.add_argument("--out", required=True, help="output SVG path")

    return parser


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return 1


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config, args.overrides)
    except ConfigError as exc:
        return _fail(str(exc))
    try:
        os.makedirs(args.out, exist_ok=True)
    except OSError as exc:
        return _fail(f"cannot create output directory {args.out}: {exc}")

    trace_path = os.path.join(args.out, "trace.csv")
    metrics_path = os.path.join(args.out, "metrics.json")
    try:
        trace, metrics = run_scenario(cfg)
    except SimulationAborted as exc:
        try:
            write_trace(exc.trace, trace_path)
        except OSError as io_exc:
            return _fail(f"cannot write {trace_path}: {io_exc}")
        print(f"error: {exc}; partial trace written to {trace_path}", file=sys.stderr)
        return 2
    except InitializationError as exc:
        return _fail(str(exc))

    try:
        write_trace(trace, trace_path)
        write_metrics(metrics, cfg, metrics_path)
    except OSError as exc:
        return _fail(f"cannot write output: {exc}")
    print(f"wrote {trace_path} ({len(trace)} records) and {metrics_path}")
    return 0


def _format_comparison(names, metric_dicts) -> str:
    rows = [("metric", *names)]
    keys = [("settle_x_s", lambda m: m["settle_time_s"]["x"]),
            ("settle_y_s", lambda m: m["settle_time_s"]["y"]),
            ("settle_z_s", lambda m: m["settle_time_s"]["z"]),
            ("final_wx_rad_s", lambda m: m["final_rates_rad_s"][0]),
            ("final_wy_rad_s", lambda m: m["final_rates_rad_s"][1]),
            ("final_wz_rad_s", lambda m: m["final_rates_rad_s"][2]),
            ("min_v", lambda m: m.get("min_v")),
            ("max_f_norm", lambda m: m.get("max_f_norm"))]
    for label, getter in keys:
        cells = [label]
        values = [getter(m) for m in metric_dicts]
        if label in ("min_v", "max_f_norm") and all(v is None for v in values):
            continue
        for val in values:
            if val is None and label.startswith("settle"):
                cells.append("unsettled")
            elif val is None:
                cells.append("")
            else:
                cells.append(f"{val:.6g}")
        rows.append(tuple(cells))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip()
                     for row in rows) + "\n"


def cmd_compare(args) -> int:
    first, second = args.controllers
    if first == second:
        return _fail("compare needs two distinct controllers")
    for name in (first, second):
        if name not in CONTROLLERS:
            return _fail(f"unknown controller {name!r}; expected one of {', '.join(CONTROLLERS)}")
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        return _fail(f"{args.config}: no such file")
    except json.JSONDecodeError as exc:
        return _fail(f"{args.config}: invalid JSON ({exc})")

    names = [first, second]
    metric_dicts = []
    for name in names:
        variant = json.loads(json.dumps(data))
        variant["controller"] = name
        try:
            cfg = parse_config(variant, args.overrides)
        except ConfigError as exc:
            return _fail(str(exc))
        out_dir = os.path.join(args.out, name)
        try:
            os.makedirs(out_dir, exist_ok=True)
        except OSError as exc:
            return _fail(f"cannot create output directory {out_dir}: {exc}")
        try:
            trace, metrics = run_scenario(cfg)
        except SimulationAborted as exc:
            write_trace(exc.trace, os.path.join(out_dir, "trace.csv"))
            print(f"error: {name}: {exc}", file=sys.stderr)
            return 2
        except InitializationError as exc:
            return _fail(f"{name}: {exc}")
        try:
            write_trace(trace, os.path.join(out_dir, "trace.csv"))
            write_metrics(metrics, cfg, os.path.join(out_dir, "metrics.json"))
        except OSError as exc:
            return _fail(f"cannot write output: {exc}")
        metric_dicts.append(metrics_to_dict(metrics, cfg))

    table = _format_comparison(names, metric_dicts)
    try:
        with open(os.path.join(args.out, "comparison.txt"), "w", encoding="utf-8") as fh:
            fh.write(table)
    except OSError as exc:
        return _fail(f"cannot write comparison table: {exc}")
    print(table, end="")
    return 0


def cmd_plot(args) -> int:
    try:
        columns = read_trace(args.trace)
    except FileNotFoundError:
        return _fail(f"{args.trace}: no such file")
    except ValueError as exc:
        return _fail(str(exc))
    try:
        svg = render_plot(columns, args.kind)
    except ValueError as exc:
        return _fail(str(exc))
    try:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(svg)
    except OSError as exc:
        return _fail(f"cannot write {args.out}: {exc}")
    print(f"wrote {args.out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    if args.command == "run":
        return cmd_run(args)
    if args.command == "compare":
        return cmd_compare(args)
    return cmd_plot(args)


if __name__ == "__main__":
    sys.exit(main())
