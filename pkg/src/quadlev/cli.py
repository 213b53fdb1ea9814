"""Command line entry point.

Subcommands: ``run`` one scenario, ``compare`` the leveler on/off pair,
``surface`` a controller's input/output map, ``tune`` the gain search.
Every artifact-producing command writes the fully resolved configuration
next to its outputs, so any artifact can be reproduced from its own
directory.  Exit codes: 0 success (for ``run``/``compare``: stabilized),
1 failed run, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import Config, ConfigError, default_config, load_config, write_config
from .control import build_stack
from .fuzzy import format_number, write_surface_csv
from .metrics import render_record, render_report, report_from_run
from .sim import RunResult, SimulationError, run, write_trajectory_csv
from .tuning import default_tuning_spec, parse_tuning_spec, tune, write_trace_csv

EXIT_OK = 0
EXIT_RUN_FAILED = 1
EXIT_USAGE = 2


def _load(args) -> Config:
    if args.config is None:
        return default_config()
    return load_config(args.config)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_run_artifacts(out: Path, result: RunResult, suffix: str = "") -> None:
    write_trajectory_csv(out / f"trajectory{suffix}.csv", result)
    report = report_from_run(result)
    (out / f"report{suffix}.txt").write_text(render_report(report), newline="\n")
    (out / f"report{suffix}.record").write_text(render_record(report), newline="\n")


def cmd_run(args) -> int:
    cfg = _load(args)
    out = _outdir(args)
    write_config(out / "resolved.config", cfg)
    overrides = {}
    if args.dt is not None:
        overrides["dt"] = args.dt
    if args.duration is not None:
        overrides["duration"] = args.duration
    if args.no_pd:
        overrides["pd_enabled"] = False
    scenario = cfg.scenario(args.scenario, **overrides)
    stack = build_stack(cfg.params, cfg.actuators, cfg.constants)
    try:
        result = run(scenario, stack, cfg.actuators, cfg.constants, cfg.guards)
    except SimulationError as exc:
        _write_run_artifacts(out, exc.partial)
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILED
    _write_run_artifacts(out, result)
    sys.stdout.write(render_report(report_from_run(result)))
    return EXIT_OK if result.stabilized else EXIT_RUN_FAILED


def cmd_compare(args) -> int:
    cfg = _load(args)
    out = _outdir(args)
    write_config(out / "resolved.config", cfg)
    stack = build_stack(cfg.params, cfg.actuators, cfg.constants)
    results = {}
    code = EXIT_OK
    for suffix, pd in (("_pd_on", True), ("_pd_off", False)):
        scenario = cfg.scenario(args.scenario, pd_enabled=pd)
        try:
            r = run(scenario, stack, cfg.actuators, cfg.constants, cfg.guards)
        except SimulationError as exc:
            r = exc.partial
            code = EXIT_RUN_FAILED
        _write_run_artifacts(out, r, suffix)
        results[suffix] = r
    on, off = results["_pd_on"], results["_pd_off"]
    l_on = float(np.max(np.abs(on.l)))
    l_off = float(np.max(np.abs(off.l)))
    summary = "\n".join(
        [
            f"scenario = {args.scenario}",
            f"outcome_pd_on = {on.outcome}",
            f"outcome_pd_off = {off.outcome}",
            f"max_abs_l_pd_on = {format_number(l_on)}",
            f"max_abs_l_pd_off = {format_number(l_off)}",
            f"ratio_off_over_on = {format_number(l_off / l_on) if l_on > 0 else 'inf'}",
        ]
    ) + "\n"
    (out / "summary.txt").write_text(summary, newline="\n")
    sys.stdout.write(summary)
    if not on.stabilized:
        code = EXIT_RUN_FAILED
    return code


def cmd_surface(args) -> int:
    cfg = _load(args)
    kind, _, num = args.controller.partition("flc")
    if kind not in ("", "s") or num not in ("1", "2", "3", "4"):
        print(
            f"unknown controller {args.controller!r}; "
            "choose flc1..flc4 or sflc1..sflc4",
            file=sys.stderr,
        )
        return EXIT_USAGE
    k = int(num) - 1
    stack = build_stack(cfg.params, cfg.actuators, cfg.constants)
    out = _outdir(args)
    write_config(out / "resolved.config", cfg)
    path = out / f"{args.controller}_surface.csv"
    if kind == "s":
        write_surface_csv(path, stack.supervisor[k].fis, args.grid)
    else:
        # pair-controller map scaled onto volts by the pair's output gain
        fis = stack.main[k].fis
        g_u = stack.main[k].g_u
        from .fuzzy import control_surface

        rows = control_surface(fis, args.grid)
        with open(path, "w", newline="\n") as fh:
            fh.write("in1,in2,out\n")
            for row in rows:
                fh.write(
                    ",".join(format_number(v) for v in (row[0], row[1], row[2] * g_u))
                    + "\n"
                )
    print(f"wrote {path}")
    return EXIT_OK


def cmd_tune(args) -> int:
    cfg = _load(args)
    if args.spec is not None:
        spec = parse_tuning_spec(Path(args.spec).read_text(), source=str(args.spec))
    else:
        spec = default_tuning_spec()
    out = _outdir(args)
    write_config(out / "resolved.config", cfg)
    result = tune(cfg, spec)
    write_config(out / "tuned.config", result.config)
    write_trace_csv(out / "trace.csv", spec, result.trace)
    print(
        f"best cost {format_number(result.cost)} after {result.evaluations} "
        f"evaluations; wrote {out / 'tuned.config'}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quadlev",
        description="Closed-loop simulator for a four-pair magnetic suspension rig.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="configuration file (defaults are built in)")
        p.add_argument("--out", default="quadlev-out", help="artifact directory")

    p_run = sub.add_parser("run", help="simulate one scenario")
    common(p_run)
    p_run.add_argument("--scenario", default="setting1")
    p_run.add_argument("--no-pd", action="store_true", help="disable the leveler")
    p_run.add_argument("--dt", type=float, help="integration step override, s")
    p_run.add_argument("--duration", type=float, help="run length override, s")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run a scenario with the leveler on and off")
    common(p_cmp)
    p_cmp.add_argument("--scenario", default="setting1")
    p_cmp.set_defaults(func=cmd_compare)

    p_surf = sub.add_parser("surface", help="export a controller surface as CSV")
    common(p_surf)
    p_surf.add_argument("controller", help="flc1..flc4 or sflc1..sflc4")
    p_surf.add_argument("--grid", type=int, default=25, help="points per input axis")
    p_surf.set_defaults(func=cmd_surface)

    p_tune = sub.add_parser("tune", help="search controller gains")
    common(p_tune)
    p_tune.add_argument("--spec", help="tuning spec file (stock box when omitted)")
    p_tune.set_defaults(func=cmd_tune)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
