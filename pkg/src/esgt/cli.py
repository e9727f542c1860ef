"""Command line front end: ``esgt {run,montecarlo,sweep,validate-dither}``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import MISSING, fields

import numpy as np

from . import bench
from .dither import design_dither, paper_recipe_periods
from .errors import ESGTError

log = logging.getLogger("esgt")


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file; explicit flags override it")
    for f in fields(bench.ScenarioConfig):
        flag = "--" + f.name.replace("_", "-")
        default = f.default if f.default is not MISSING else None
        if f.type == "bool":
            p.add_argument(flag, dest=f.name, action="store_const", const=True, default=None, help=f"(default {default})")
        else:
            conv = {"int": int, "float": float}.get(f.type, str)
            p.add_argument(flag, dest=f.name, type=conv, default=None, help=f"(default {default})")


def _resolve(args) -> bench.ScenarioConfig:
    values: dict = {}
    if args.config:
        values.update(bench.read_config_file(args.config))
    for f in fields(bench.ScenarioConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    return bench.ScenarioConfig.from_mapping(values)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="esgt", description="Extremum Seeking Tracking simulations")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single scenario run, metrics CSV")
    _add_scenario_flags(p)

    p = sub.add_parser("montecarlo", help="mean metrics over n_instances seeds")
    _add_scenario_flags(p)

    p = sub.add_parser("sweep", help="asymptotic floor over a (gamma, delta) grid")
    _add_scenario_flags(p)
    p.add_argument("--gammas", type=_float_list, required=True, help="comma separated")
    p.add_argument("--deltas", type=_float_list, required=True, help="comma separated")

    p = sub.add_parser("validate-dither", help="check a dither design and print its period sums")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--periods", type=_int_list, help="odd-component periods; default: geometric recipe")
    p.add_argument("--tau0", type=int, default=3)
    p.add_argument("--tau0i", type=int, default=2)
    p.add_argument("--phi0", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=0.2)
    return parser


def _validate_dither(args) -> int:
    periods = args.periods if args.periods is not None else paper_recipe_periods(args.dim, args.tau0, args.tau0i)
    rep = bench.dither_report(design_dither(args.dim, periods, args.phi0, args.delta))
    np.set_printoptions(precision=3, suppress=True)
    print(rep["config"])
    print(f"period={rep['period']}")
    print(f"sum={rep['sum']}")
    print(f"sum_sq={rep['sum_sq']}  (expect {rep['period'] / 2:g} each)")
    print(f"sum_cube={rep['sum_cube']}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "validate-dither":
            return _validate_dither(args)
        config = _resolve(args)
        if args.command == "run":
            rec = bench.run_scenario(config)
            last = rec.metrics[-1]
            print(f"round={last.round} cost_rel_err={last.cost_rel_err:.3e} var_rel_err={last.var_rel_err:.3e} -> {config.output}")
        elif args.command == "montecarlo":
            agg = bench.run_montecarlo(config)
            print(f"{agg['n_ok']}/{config.n_instances} instances, final mean cost_rel_err={agg['cost_rel_err'][-1]:.3e} -> {config.output}")
        elif args.command == "sweep":
            for row in bench.sweep(config, args.gammas, args.deltas):
                print(f"gamma={row['gamma']:g} delta={row['delta']:g} floor={row['floor']:.4g}")
    except (ESGTError, ValueError, OSError) as exc:
        print(f"esgt: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
