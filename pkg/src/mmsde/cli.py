"""Command line interface.

Subcommands:
  skorokhod   solve one deterministic Skorokhod problem from a path file
  simulate    emit one scheme trajectory
  converge    Euler convergence study across partition levels -> errors.csv
  compare     Yosida / modified-Yosida comparison against fine Euler -> errors.csv
  verify      randomized property suite -> JSON report

Exit codes: 0 success, 2 configuration error, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from .config import ExperimentConfig, load_config
from .errors import ConfigError, NonConvergenceError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmsde",
        description="Skorokhod problems and jump SDEs driven by maximal "
                    "monotone operators",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="configuration file")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--trajectories", type=int, default=None,
                       help="trajectory count override")
        p.add_argument("--format", choices=("csv", "jsonl"), default=None,
                       help="output format override")
        p.add_argument("--workers", type=int, default=None,
                       help="worker process count override")

    p = sub.add_parser("skorokhod", help="solve one deterministic problem from a path file")
    common(p)
    p.add_argument("--path", required=True, help="input step path (csv or jsonl)")
    p.add_argument("--substeps", type=int, default=None, help="flow substeps override")

    p = sub.add_parser("simulate", help="emit one scheme trajectory")
    common(p)
    p.add_argument("--scheme", choices=("euler", "yosida", "modified_yosida"),
                   default="euler")
    p.add_argument("--trajectory", type=int, default=0, help="trajectory index")
    p.add_argument("--level", type=int, default=None,
                   help="partition level (default: finest configured)")
    p.add_argument("--yosida-n", type=float, default=None,
                   help="stiffness level for Yosida schemes (default: finest configured)")

    p = sub.add_parser("converge", help="Euler convergence study")
    common(p)

    p = sub.add_parser("compare", help="compare schemes on shared realizations")
    common(p)

    p = sub.add_parser("verify", help="randomized property suite")
    common(p)
    p.add_argument("--samples", type=int, default=2000,
                   help="random samples per property")

    return parser


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    return cfg.with_overrides(
        seed=args.seed,
        out_dir=args.out,
        trajectories=args.trajectories,
        format=getattr(args, "format", None),
        workers=args.workers,
    ).validate()


def _ensure_out(cfg: ExperimentConfig) -> str:
    os.makedirs(cfg.out_dir, exist_ok=True)
    return cfg.out_dir


def _write_components(cfg, out_path, components: dict, meta: dict):
    from .paths import write_step_path_csv, write_step_path_jsonl

    with open(out_path, "w", encoding="utf-8") as fh:
        if cfg.format == "csv":
            first = True
            for name, path in components.items():
                write_step_path_csv(path, fh, component=name,
                                    meta=meta if first else None, header=first)
                first = False
        else:
            first = True
            for name, path in components.items():
                write_step_path_jsonl(path, fh, component=name,
                                      meta=meta if first else None)
                first = False


def _cmd_skorokhod(args) -> int:
    from .config import build_operator, build_projection
    from .paths import read_step_path_csv, read_step_path_jsonl
    from .skorokhod import solve_step

    cfg = _load(args)
    op = build_operator(cfg.operator)
    proj = build_projection(cfg.projection)
    with open(args.path, "r", encoding="utf-8") as fh:
        if args.path.endswith(".jsonl"):
            y = read_step_path_jsonl(fh)
        else:
            y = read_step_path_csv(fh)
    substeps = args.substeps or cfg.flow_substeps
    sol = solve_step(op, proj, y, flow_substeps=substeps)
    out_dir = _ensure_out(cfg)
    out_path = os.path.join(out_dir, f"solution.{cfg.format}")
    meta = {"operator": json.dumps(cfg.operator, sort_keys=True),
            "projection": json.dumps(cfg.projection, sort_keys=True),
            "flow_substeps": substeps}
    _write_components(cfg, out_path, sol.export_components(), meta)
    print(out_path)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    from .config import build_coefficient, build_driver, build_operator, build_projection
    from .drivers import simulate
    from .harness import _Context
    from .paths import uniform_partition
    from .schemes import modified_yosida_scheme, yosida_scheme

    cfg = _load(args)
    ctx = _Context(cfg)
    level = args.level or cfg.levels[-1]
    part = uniform_partition(cfg.horizon, level)
    realization = simulate(ctx.driver, part, cfg.seed, args.trajectory)
    if args.scheme == "euler":
        out = ctx.run_euler(realization)
    else:
        n_level = args.yosida_n or cfg.yosida_levels[-1]
        if args.scheme == "yosida":
            out = yosida_scheme(ctx.op, n_level, ctx.coeff, realization,
                                cfg.drift_substeps)
        else:
            out = modified_yosida_scheme(ctx.op, ctx.proj, n_level, ctx.coeff,
                                         realization, cfg.drift_substeps)
    out_dir = _ensure_out(cfg)
    out_path = os.path.join(out_dir, f"trajectory_{out.scheme}.{cfg.format}")
    meta = {
        "scheme": out.scheme,
        "params": json.dumps(out.params, sort_keys=True),
        "seed": cfg.seed,
        "trajectory": args.trajectory,
        "operator": json.dumps(cfg.operator, sort_keys=True),
        "projection": json.dumps(cfg.projection, sort_keys=True),
        "coefficient": json.dumps(cfg.coefficient, sort_keys=True),
    }
    _write_components(cfg, out_path, {"x": out.x, "k": out.k_path}, meta)
    print(out_path)
    return EXIT_OK


def _write_table(cfg: ExperimentConfig, table) -> str:
    out_dir = _ensure_out(cfg)
    out_path = os.path.join(out_dir, "errors.csv")
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(table.to_csv())
    return out_path


def _cmd_converge(args) -> int:
    from .harness import run_convergence

    cfg = _load(args)
    table = run_convergence(cfg)
    print(_write_table(cfg, table))
    return EXIT_OK


def _cmd_compare(args) -> int:
    from .harness import compare_schemes

    cfg = _load(args)
    table = compare_schemes(cfg)
    print(_write_table(cfg, table))
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .harness import verify_suite

    cfg = _load(args)
    report = verify_suite(cfg, samples=args.samples)
    payload = {name: res.as_dict() for name, res in sorted(report.items())}
    print(json.dumps(payload, indent=2, sort_keys=True))
    out_dir = _ensure_out(cfg)
    with open(os.path.join(out_dir, "verify.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    return EXIT_OK


_COMMANDS = {
    "skorokhod": _cmd_skorokhod,
    "simulate": _cmd_simulate,
    "converge": _cmd_converge,
    "compare": _cmd_compare,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        print(f"numerical non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
