"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 solver abort, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .anisotropy import (AnisotropyModel, ConfigurationError, StabilityCase,
                         stability_table)
from .config import (PRESET_NAMES, ConfigError, RunConfig, build_events,
                     build_initial_curve, build_model, build_newton,
                     build_params, config_to_dict, load_config, preset)
from .curve import CurveError, Topology
from .diagnostics import convergence_harness
from .evolve import StepFailure, evolve, seed_state
from .output import (OutputError, read_snapshot, write_convergence,
                     write_run_outputs, write_stability_table,
                     write_surface_obj)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4


def _load(args) -> RunConfig:
    if args.config is not None:
        cfg = load_config(args.config)
    elif args.preset is not None:
        cfg = preset(args.preset)
    else:
        raise ConfigError("give --config or --preset")
    return cfg


def _run_config(cfg: RunConfig):
    model = build_model(cfg)
    params = build_params(cfg)
    initial = build_initial_curve(cfg)
    state = seed_state(initial)
    return evolve(state, model, params, cfg.discretization.dt,
                  cfg.discretization.t_end, newton=build_newton(cfg),
                  events=build_events(cfg))


def cmd_run(args) -> int:
    cfg = _load(args)
    out_dir = args.out or cfg.output.directory
    run = _run_config(cfg)
    write_run_outputs(out_dir, run, config_to_dict(cfg),
                      snapshot_every=cfg.output.snapshot_every)
    for row in run.branches[-1].diagnostics[-1:]:
        print(f"final t={row['t']:.6g} W={row['W']:.9g} dV={row['dV']:.3g} "
              f"Rh={row['Rh']:.4g}")
    for event in run.events:
        print(f"event {event.kind} at t={event.time:.6g}")
    print(f"wrote {out_dir}")
    return EXIT_OK


def cmd_converge(args) -> int:
    cfg = _load(args)
    from .config import CURVE_FORMS
    if cfg.initial.form is None:
        raise ConfigError("converge needs a preset with a closed-form curve")
    fn, topo = CURVE_FORMS[cfg.initial.form]
    tables = convergence_harness(
        fn, topo, build_model(cfg), build_params(cfg),
        base_J=cfg.discretization.J, base_dt=cfg.discretization.dt,
        levels=args.levels, eval_times=tuple(args.times),
        newton=build_newton(cfg))
    out = Path(args.out or cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    for table in tables:
        name = f"convergence_t{table.eval_time:g}.csv"
        write_convergence(out / name, table)
        print(f"t = {table.eval_time:g}")
        for row in table.rows:
            order = "" if row.order != row.order else f"{row.order:.3f}"
            print(f"  level {row.level}: J={row.J:5d} dt={row.dt:.3e} "
                  f"error={row.error:.6e} order={order}")
    print(f"wrote {out}")
    return EXIT_OK


def _parse_value(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _override(cfg: RunConfig, dotted: str, value) -> RunConfig:
    if "." not in dotted:
        raise ConfigError(f"--vary key must look like section.field, got {dotted!r}")
    section, field_name = dotted.split(".", 1)
    try:
        current = getattr(cfg, section)
        updated = replace(current, **{field_name: value})
    except (AttributeError, TypeError) as exc:
        raise ConfigError(f"unknown config field {dotted!r}") from exc
    return replace(cfg, **{section: updated})


def cmd_sweep(args) -> int:
    cfg = _load(args)
    key, _, values = args.vary.partition("=")
    if not values:
        raise ConfigError("--vary expects section.field=v1,v2,...")
    out = Path(args.out or cfg.output.directory)
    for raw in values.split(","):
        value = _parse_value(raw)
        sub = _override(cfg, key, value)
        sub.validate()
        run = _run_config(sub)
        tag = f"{key.replace('.', '_')}_{raw}"
        write_run_outputs(out / tag, run, config_to_dict(sub),
                          snapshot_every=sub.output.snapshot_every)
        events = ", ".join(f"{e.kind}@{e.time:.4g}" for e in run.events) or "none"
        print(f"{key}={raw}: events: {events}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_export_surface(args) -> int:
    state = read_snapshot(args.snapshot, Topology(args.topology))
    write_surface_obj(args.out, state.curve, segments=args.segments)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_stability_table(args) -> int:
    q = args.q if args.q is not None else (0 if args.case == "I" else 1)
    model = AnisotropyModel(kind="fourfold", beta=args.beta, q=q)
    table = stability_table(model, case=StabilityCase(args.case),
                            n_theta=args.points, grid=args.grid)
    write_stability_table(args.out, table)
    print(f"wrote {args.out}")
    return EXIT_OK


def _add_source(p) -> None:
    p.add_argument("--config", help="JSON run configuration file")
    p.add_argument("--preset", choices=PRESET_NAMES, help="named preset")
    p.add_argument("--out", help="output directory (default from config)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dewetting",
        description="Axisymmetric solid-state dewetting with strongly "
                    "anisotropic surface energy and Willmore regularization.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="evolve a film and write outputs")
    _add_source(p)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("converge", help="mesh/time refinement study")
    _add_source(p)
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--times", type=float, nargs="+", default=[1.0, 2.0])
    p.set_defaults(fn=cmd_converge)

    p = sub.add_parser("sweep", help="run a preset across parameter values")
    _add_source(p)
    p.add_argument("--vary", required=True,
                   help="section.field=v1,v2,... e.g. model.beta=0.07,0.1")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("export-surface",
                       help="snapshot CSV -> surface-of-revolution OBJ")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--segments", type=int, default=64)
    p.add_argument("--topology", choices=[t.value for t in Topology],
                   default="two_contact_lines")
    p.set_defaults(fn=cmd_export_surface)

    p = sub.add_parser("stability-table",
                       help="tabulate the minimal stabilizing function")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--q", type=int, default=None, choices=[0, 1],
                   help="curvature power; defaults to the case's natural value")
    p.add_argument("--case", default="II", choices=["I", "II", "III"])
    p.add_argument("--points", type=int, default=64)
    p.add_argument("--grid", type=int, default=512)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_stability_table)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ConfigurationError, CurveError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StepFailure as exc:
        print(f"solver abort: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (OutputError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
