"""Command-line front end: solve, export CSV/JSON tables, reproducibly.

Subcommands: ``enumerate`` (all MFG equilibria plus trajectories),
``entropy`` (field, shock audit, characteristic fans), ``hjb`` (value
grid, majority report, optional convergence sweep), ``simulate`` (CTMC
paths and selection statistics).  Every run writes a ``manifest.json``
next to its outputs; exit codes are 0 on success, 2 for argument or
validation errors, 3 for numerical failures.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .model import ModelParams
from . import entropy as en
from . import hjb
from . import mfg
from . import sim

_FMT = "%.17g"


def _write_csv(path, header, columns):
    cols = [np.asarray(c) for c in columns]
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for row in zip(*cols):
            f.write(",".join(_FMT % x for x in row) + "\n")


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _manifest(out_dir, command, params, seed=None, elapsed=None, tolerances=None):
    _write_json(
        os.path.join(out_dir, "manifest.json"),
        {
            "schema_version": 1,
            "command": command,
            "params": params,
            "version": __version__,
            "seed": seed,
            "elapsed_seconds": elapsed,
            "tolerances": tolerances or {},
        },
    )


def _apply_config_file(args, parser, argv):
    """key=value lines provide defaults; explicit flags override them."""
    if not getattr(args, "config", None):
        return args
    explicit = {
        tok[2:].partition("=")[0].replace("-", "_")
        for tok in argv
        if tok.startswith("--")
    }
    overrides = {}
    try:
        with open(args.config, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, _, value = line.partition("=")
                overrides[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        parser.error(f"cannot read config file: {exc}")
    for key, value in overrides.items():
        if not hasattr(args, key):
            parser.error(f"unknown config key: {key}")
        if key in explicit:  # flag given explicitly wins
            continue
        current = getattr(args, key)
        caster = type(current) if current is not None else str
        setattr(args, key, caster(value))
    return args


def cmd_enumerate(args) -> int:
    try:
        params = ModelParams(eta=args.eta, horizon=args.T, theta_bar=args.theta_bar)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    os.makedirs(args.out, exist_ok=True)
    t0 = time.time()
    try:
        report = mfg.enumerate_equilibria(params, scan_resolution=args.scan_resolution)
        solutions = [
            mfg.recover_trajectories(s.v, params, n_points=args.n_points)
            for s in report.solutions
        ]
    except Exception as exc:  # numerical failure path
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    payload = {
        "schema_version": 1,
        "eta": params.eta,
        "horizon": params.horizon,
        "theta_bar": params.theta_bar,
        "count": report.count,
        "v": [s.v for s in report.solutions],
        "residuals": [s.residual for s in report.solutions],
        "stopped": [s.stopped for s in report.solutions],
        "entropy_index": next(
            i for i, s in enumerate(report.solutions) if s.entropy_selected
        ),
        "tangency_candidates": report.tangency_candidates,
    }
    _write_json(os.path.join(args.out, "solutions.json"), payload)
    for k, sol in enumerate(solutions):
        _write_csv(
            os.path.join(args.out, f"trajectory_{k}.csv"),
            ["t", "theta", "u0", "u1", "y", "x"],
            [sol.t, sol.theta, sol.u0, sol.u1, sol.y, 2.0 * sol.theta - 1.0],
        )
    _manifest(
        args.out,
        "enumerate",
        {"eta": args.eta, "T": args.T, "theta_bar": args.theta_bar,
         "scan_resolution": args.scan_resolution, "n_points": args.n_points},
        elapsed=time.time() - t0,
        tolerances={"scan_resolution": args.scan_resolution},
    )
    print(f"count={report.count} entropy_v={report.entropy_selected.v:.17g}")
    return 0


def cmd_entropy(args) -> int:
    if args.nx < 3 or args.nt < 3:
        print("error: grid sizes must be at least 3", file=sys.stderr)
        return 2
    if args.eta < 0 or args.T_max <= 0:
        print("error: eta must be >= 0 and T-max > 0", file=sys.stderr)
        return 2
    os.makedirs(args.out, exist_ok=True)
    t0 = time.time()
    try:
        field = en.build_field(args.eta, args.T_max, nx=args.nx, nt=args.nt)
        tt, xx = np.meshgrid(field.t, field.x, indexing="ij")
        _write_csv(
            os.path.join(args.out, "entropy_field.csv"),
            ["t", "x", "Y"],
            [tt.ravel(), xx.ravel(), field.Y.ravel()],
        )
        onset = field.onset
        rows = {k: [] for k in
                ["t", "Y_plus", "Y_minus", "rh_residual", "lax_min_left", "lax_min_right"]}
        if math.isfinite(onset):
            for t in field.t[field.t > onset]:
                d = en.shock_diagnostics(float(t), args.eta)
                rows["t"].append(d.t)
                rows["Y_plus"].append(d.Y_plus)
                rows["Y_minus"].append(d.Y_minus)
                rows["rh_residual"].append(d.rankine_hugoniot_residual)
                rows["lax_min_left"].append(float(np.min(d.lax_slack_left)))
                rows["lax_min_right"].append(float(np.min(d.lax_slack_right)))
        _write_csv(os.path.join(args.out, "shock.csv"), list(rows), list(rows.values()))
        # Characteristic fan at this instance's parameters.
        _write_fan(os.path.join(args.out, "characteristic_fan.csv"),
                   args.eta, args.T_max, args.n_fan_curves)
    except Exception as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    _manifest(
        args.out,
        "entropy",
        {"eta": args.eta, "T_max": args.T_max, "nx": args.nx, "nt": args.nt,
         "n_fan_curves": args.n_fan_curves},
        elapsed=time.time() - t0,
    )
    print(f"onset={onset:.17g} rows={field.Y.size}")
    return 0


def _write_fan(path, eta, t_max, n_curves):
    from . import characteristics as ch
    from .model import regime

    reg = regime(eta)
    if reg.v_zero is not None:
        vs = np.concatenate(
            [reg.v_zero * np.linspace(0.05, 0.995, n_curves // 2),
             reg.v_zero + np.geomspace(1e-3, 1.0, n_curves - n_curves // 2)]
        )
    else:
        vs = np.linspace(0.05, 2.0, n_curves)
    vs = np.concatenate([-vs[::-1], [0.0], vs])
    ts = np.linspace(0.0, t_max, 201)
    col_v, col_t, col_x, col_y = [], [], [], []
    for v in vs:
        p = ch.QuadPath(float(v), eta)
        try:
            y, yd = p.state(ts)
            tv = ts
        except ch.BlowUpError as exc:
            tv = ts[ts < exc.escape_time * (1 - 1e-9)]
            y, yd = p.state(tv)
        x = ch.shooting_value(y, yd, eta)
        col_v.append(np.full_like(tv, v))
        col_t.append(tv)
        col_x.append(np.atleast_1d(x))
        col_y.append(np.atleast_1d(y))
    _write_csv(
        path,
        ["v", "t", "x", "y"],
        [np.concatenate(col_v), np.concatenate(col_t),
         np.concatenate(col_x), np.concatenate(col_y)],
    )


def cmd_hjb(args) -> int:
    try:
        params = ModelParams(eta=args.eta, horizon=args.T, theta_bar=0.5)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.N < 1:
        print("error: N must be >= 1", file=sys.stderr)
        return 2
    os.makedirs(args.out, exist_ok=True)
    t0 = time.time()
    try:
        grid = hjb.solve_hjb(args.N, params, steps=args.steps)
        policy = hjb.extract_policy(grid)
    except hjb.InstabilityError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    stride = max(len(grid.t_mesh) // args.t_report, 1)
    sel = slice(None, None, stride)
    tt, th = np.meshgrid(grid.t_mesh[sel], grid.theta, indexing="ij")
    _write_csv(
        os.path.join(args.out, "value_grid.csv"),
        ["t", "theta", "V1", "alpha1", "alpha0"],
        [tt.ravel(), th.ravel(), grid.V1[sel].ravel(),
         policy.alpha1[sel].ravel(), policy.alpha0[sel].ravel()],
    )
    payload = {"schema_version": 1, "N": args.N, "eta": args.eta, "T": args.T}
    if args.eta == 0.0:
        report = hjb.verify_majority(grid)
        payload.update(dataclasses.asdict(report))
        payload["clean_at_1e-9"] = report.clean()
    _write_json(os.path.join(args.out, "majority_report.json"), payload)
    if args.convergence_N:
        sups = []
        for n in args.convergence_N:
            g = hjb.solve_hjb(n, params)
            sups.append(hjb.compare_to_master(g, exclusion=args.exclusion))
        _write_csv(
            os.path.join(args.out, "convergence.csv"),
            ["N", "sup_error"],
            [np.array(args.convergence_N, dtype=float), np.array(sups)],
        )
    _manifest(
        args.out,
        "hjb",
        {"N": args.N, "eta": args.eta, "T": args.T, "steps": args.steps,
         "convergence_N": args.convergence_N, "exclusion": args.exclusion},
        elapsed=time.time() - t0,
    )
    print(f"solved N={args.N} steps={len(grid.t_mesh) - 1}")
    return 0


def cmd_simulate(args) -> int:
    if args.policy == "nash" and not args.value_dir:
        print("error: --policy nash requires --value-dir (an hjb output)",
              file=sys.stderr)
        return 2
    if args.initial_at_zero is None and args.theta_bar is None:
        print("error: provide --initial-at-zero or --theta-bar", file=sys.stderr)
        return 2
    os.makedirs(args.out, exist_ok=True)
    t0 = time.time()
    try:
        if args.policy == "nash":
            params = ModelParams(eta=args.eta, horizon=args.T, theta_bar=0.5)
            grid = hjb.solve_hjb(args.n_players - 1, params)
            policy = sim.NashPolicy(hjb.extract_policy(grid))
        elif args.policy == "entropy":
            params = ModelParams(
                eta=args.eta, horizon=args.T,
                theta_bar=args.theta_bar
                if args.theta_bar is not None
                else args.initial_at_zero / args.n_players,
            )
            v = mfg.solve_stopped(params)
            sol = mfg.recover_trajectories(v, params)
            policy = sim.EntropyPolicy(sol.t, sol.y)
        else:
            policy = sim.ConstantPolicy(args.constant_rate)
        config = sim.SimConfig(
            n_players=args.n_players,
            policy=policy,
            eta=args.eta,
            horizon=args.T,
            initial_at_zero=args.initial_at_zero,
            theta_bar=args.theta_bar,
            n_runs=args.n_runs,
            seed=args.seed,
            n_report=args.n_report,
        )
        result = sim.simulate(config)
    except (ValueError, hjb.InstabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    paths_dir = os.path.join(args.out, "paths")
    os.makedirs(paths_dir, exist_ok=True)
    keep = min(args.n_path_files, len(result.runs))
    for r in range(keep):
        run = result.runs[r]
        _write_csv(
            os.path.join(paths_dir, f"run_{r}.csv"),
            ["t", "theta"],
            [result.report_mesh, run.theta_report],
        )
    stats = sim.selection_stats(result)
    payload = {"schema_version": 1, **dataclasses.asdict(stats),
               "side_counts": list(result.side_counts),
               "monotone_gap_all_runs": sim.majority_gap_monotone(result)
               if args.eta == 0.0 else None,
               "terminal_theta_mean": float(np.mean(result.terminal_thetas))}
    _write_json(os.path.join(args.out, "selection.json"), payload)
    _manifest(
        args.out,
        "simulate",
        {"n_players": args.n_players, "policy": args.policy, "eta": args.eta,
         "T": args.T, "initial_at_zero": args.initial_at_zero,
         "theta_bar": args.theta_bar, "n_runs": args.n_runs,
         "n_report": args.n_report},
        seed=args.seed,
        elapsed=time.time() - t0,
    )
    print(f"runs={args.n_runs} above={stats.above_fraction:.4f} "
          f"below={stats.below_fraction:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twostate-mfg",
        description="Two-state mean-field game toolkit: equilibria, entropy "
        "solution, N-player values, and exact game simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", help="find all MFG equilibria")
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--theta-bar", type=float, required=True)
    p.add_argument("--scan-resolution", type=float, default=1e-4)
    p.add_argument("--n-points", type=int, default=2048)
    p.add_argument("--out", default="out_enumerate")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("entropy", help="build the entropy solution field")
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--T-max", type=float, required=True)
    p.add_argument("--nx", type=int, default=401)
    p.add_argument("--nt", type=int, default=400)
    p.add_argument("--n-fan-curves", type=int, default=20)
    p.add_argument("--out", default="out_entropy")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("hjb", help="solve the N-player value system")
    p.add_argument("--N", type=int, required=True, help="number of other players")
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--t-report", type=int, default=50,
                   help="max time slices written to value_grid.csv")
    p.add_argument("--convergence-N", type=int, nargs="*", default=None)
    p.add_argument("--exclusion", type=float, default=0.1)
    p.add_argument("--out", default="out_hjb")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_hjb)

    p = sub.add_parser("simulate", help="simulate the (N+1)-player game")
    p.add_argument("--n-players", type=int, required=True)
    p.add_argument("--policy", choices=["nash", "entropy", "constant"],
                   default="nash")
    p.add_argument("--value-dir", default=None,
                   help="hjb output directory (documents provenance of the "
                   "Nash policy; the grid is re-solved from the manifest "
                   "parameters)")
    p.add_argument("--constant-rate", type=float, default=0.0)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--initial-at-zero", type=int, default=None)
    p.add_argument("--theta-bar", type=float, default=None)
    p.add_argument("--n-runs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-report", type=int, default=101)
    p.add_argument("--n-path-files", type=int, default=20)
    p.add_argument("--out", default="out_simulate")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    try:
        args = parser.parse_args(argv)
        args = _apply_config_file(args, parser, argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
