"""Command line interface: ``tfspde {sample-tfbm,solve,table,holder}``.

Exit status is 0 on success, 2 for usage or validation errors and 1 when a
numerical stage fails (the stage is named on stderr).
"""

from __future__ import annotations

import argparse
import contextlib
import json
import sys

import numpy as np

from . import harness, spectral, tfgn
from .errors import ConfigurationError, DomainError, ShapeError, TfspdeError
from .solver import Forcing, ModelConfig, NoiseSpec, solve_path

CONFIG_KEYS = ("alpha", "hurst", "mu", "rho", "horizon", "modes_per_dim", "steps",
               "trajectories", "seed", "preset", "output")


class StageFailure(Exception):
    def __init__(self, stage, exc):
        super().__init__(f"{stage} failed: {exc}")
        self.stage = stage
        self.exc = exc


@contextlib.contextmanager
def stage(name):
    try:
        yield
    except (DomainError, ConfigurationError, ShapeError):
        raise
    except (TfspdeError, ArithmeticError, FloatingPointError, np.linalg.LinAlgError) as exc:
        raise StageFailure(name, exc) from exc


def _parser():
    p = argparse.ArgumentParser(prog="tfspde", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="flat JSON file with default values for the flags")
    sub = p.add_subparsers(dest="command", required=True)

    def model_flags(sp, with_rho=True):
        sp.add_argument("--hurst", type=float)
        sp.add_argument("--mu", type=float)
        sp.add_argument("--horizon", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--steps", type=int)
        sp.add_argument("--output")
        if with_rho:
            sp.add_argument("--alpha", type=float)
            sp.add_argument("--rho", type=float)
            sp.add_argument("--modes-per-dim", dest="modes_per_dim", type=int)

    s = sub.add_parser("sample-tfbm", help="sample tfBm paths on a uniform grid")
    model_flags(s, with_rho=False)
    s.add_argument("--paths", type=int, default=1)
    s.add_argument("--binary", help="also write the increment table in binary form")

    s = sub.add_parser("solve", help="solve one trajectory and export it")
    model_flags(s)
    s.add_argument("--trajectory", type=int, default=0)
    s.add_argument("--ratio", type=int, default=1, help="convolution sub-steps per time step")
    s.add_argument("--forcing", choices=("linear", "zero"), default="linear")
    s.add_argument("--dim", type=int, default=2)
    s.add_argument("--binary", help="also write the trajectory in binary form")

    for name, helptext in (("table", "reproduce a convergence table"),
                           ("holder", "estimate the temporal Hölder exponent")):
        s = sub.add_parser(name, help=helptext)
        model_flags(s)
        s.add_argument("--preset")
        s.add_argument("--k", "--trajectories", dest="trajectories", type=int)
        s.add_argument("--threads", type=int)
        if name == "holder":
            s.add_argument("--lags", type=lambda v: tuple(int(x) for x in v.split(",")))
    return p


def _merge_config(args):
    if not args.config:
        return args
    with open(args.config) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ConfigurationError("config file must hold one flat JSON object")
    unknown = set(cfg) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    for key, value in cfg.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, value)
    return args


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise ConfigurationError("missing required values: " + ", ".join("--" + m.replace("_", "-")
                                                                           for m in missing))


def _sample(args):
    args.horizon = 1.0 if args.horizon is None else args.horizon
    args.seed = 0 if args.seed is None else args.seed
    _need(args, "hurst", "mu", "steps")
    params = tfgn.TemperingParams(args.hurst, args.mu)
    grid = tfgn.TimeGrid(args.horizon, args.steps)
    if args.paths < 1:
        raise ConfigurationError("--paths must be positive")
    with stage("factorization"):
        factor = tfgn.shared_factor(params, grid)
    with stage("sampling"):
        table = tfgn.sample_increments(factor, args.paths, args.seed, grid=grid, params=params)
    out = args.output or "tfbm.csv"
    paths = np.concatenate([np.zeros((table.modes, 1)), table.paths()], axis=1)
    with open(out, "w") as fh:
        fh.write(",".join(["step", "time"] + [f"path_{j}" for j in range(table.modes)]) + "\n")
        for k, t in enumerate(grid.times):
            fh.write(",".join([str(k), repr(float(t))] + [repr(float(v)) for v in paths[:, k]]) + "\n")
    if args.binary:
        tfgn.dump_table(table, args.binary)
    print(f"wrote {table.modes} paths of {grid.steps} steps to {out}")


def _solve(args):
    args.horizon = 1.0 if args.horizon is None else args.horizon
    args.seed = 0 if args.seed is None else args.seed
    _need(args, "alpha", "hurst", "mu", "rho", "modes_per_dim", "steps")
    params = tfgn.TemperingParams(args.hurst, args.mu)
    basis = spectral.build_basis(args.dim, args.modes_per_dim)
    config = ModelConfig(spectral.FractionalPower(args.alpha), args.horizon,
                         Forcing(args.forcing), NoiseSpec(args.rho), args.ratio)
    grid = tfgn.TimeGrid(args.horizon, args.steps * args.ratio)
    u0 = spectral.project(harness.INITIAL_CONDITIONS["x2y2"], basis)
    with stage("factorization"):
        factor = tfgn.shared_factor(params, grid)
    with stage("sampling"):
        table = tfgn.sample_increments(factor, basis.mode_tuples(), args.seed, grid=grid,
                                       params=params, trajectory=args.trajectory)
    with stage("solve"):
        traj = solve_path(config, basis, u0, table, steps=args.steps)
    out = args.output or "trajectory.csv"
    traj.to_csv(out)
    if args.binary:
        traj.dump(args.binary)
    print(f"wrote {traj.steps + 1} states of {basis.size} modes to {out}")


def _plan_overrides(args):
    keys = ("alpha", "hurst", "mu", "rho", "horizon", "steps", "modes_per_dim", "trajectories")
    over = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    if args.seed is not None:
        over["master_seed"] = args.seed
    if getattr(args, "lags", None):
        over["lags"] = args.lags
    return over


def _table(args):
    _need(args, "preset")
    sweep, plans = harness.preset_plans(args.preset, **_plan_overrides(args))
    if plans[0].mode == "holder":
        raise ConfigurationError(f"preset {args.preset} is a Hölder preset; use 'holder'")
    threads = harness.resolve_threads(args.threads)
    with stage("monte carlo"):
        reports = harness.run_sweep(plans, threads)
    out = args.output or f"{args.preset}.csv"
    with stage("report"):
        harness.write_report(reports, out, sweep)
    for rep in reports:
        tag = f"{sweep}={getattr(rep.plan, sweep)} " if sweep else ""
        rates = ", ".join(f"{r:.3f}" for r in rep.rates)
        print(f"{tag}errors {', '.join(f'{e:.3e}' for e in rep.errors)}; rates {rates}; "
              f"predicted {rep.predicted:.3f}")
    print(f"wrote {out}")


def _holder(args):
    args.preset = args.preset or "holder_rough"
    _, plans = harness.preset_plans(args.preset, **_plan_overrides(args))
    plan = plans[0]
    if plan.mode != "holder":
        raise ConfigurationError(f"preset {args.preset} is not a Hölder preset")
    with stage("monte carlo"):
        rep = harness.holder_study(plan, harness.resolve_threads(args.threads))
    out = args.output or f"{args.preset}.json"
    with open(out, "w") as fh:
        json.dump(rep.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"Hölder exponent estimate {rep.exponent:.3f} "
          f"(predicted {min(plan.hurst, 1.0):.3f}); wrote {out}")


_COMMANDS = {"sample-tfbm": _sample, "solve": _solve, "table": _table, "holder": _holder}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args = _merge_config(args)
        _COMMANDS[args.command](args)
    except StageFailure as exc:
        print(f"tfspde: stage '{exc.stage}' failed: {exc.exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"tfspde: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
