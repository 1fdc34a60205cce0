"""Command-line front end: experiment dispatch and CSV/JSON persistence.

Exit codes: 0 success, 2 usage error, 3 solver size cap exceeded, 4 I/O
failure. A flat ``key = value`` config file may provide any long option;
command-line flags win on conflict. The master seed falls back to the
``EB_SEED`` environment variable when neither source sets it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .combinatorial import BipartiteInstance, ProblemKind, is_feasible, solution_to_csv
from .experiments import (
    concentration_check,
    d2_log_correction,
    growth_check,
    hypergeometric_moment_check,
    mixture_matching,
    poisson_moment_check,
    records_to_csv,
    scaling_experiment,
    scaling_fit_to_jsonl,
    subadditivity_defect,
)
from .geometry import Cube, InvalidDomainError, read_polycube
from .sampling import read_density_grid
from .solvers import (
    SizeLimitError,
    brute_force,
    solve_bipartite_tsp_exact,
    solve_heuristic,
    solve_matching_exact,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SIZE_CAP = 3
EXIT_IO = 4

_CONFIG_KEYS = {
    "problem", "d", "p", "n-list", "trials", "seed", "workers", "density",
    "domain", "out", "mode", "kappa", "eta", "L", "m", "bad-rule", "timings",
}


def _parse_config_file(path: str) -> dict:
    values = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected key = value")
                key, val = (s.strip() for s in line.split("=", 1))
                if key not in _CONFIG_KEYS:
                    raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
                values[key] = val
    except OSError as exc:
        raise ValueError(f"cannot read config file: {exc}") from exc
    return values


def _n_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad n-list {text!r}")
    if not values or any(v <= 0 for v in values):
        raise argparse.ArgumentTypeError(f"n-list entries must be positive: {text!r}")
    return values


def _positive_int(name):
    def convert(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be an integer")
        if v <= 0:
            raise argparse.ArgumentTypeError(f"{name} must be positive")
        return v
    return convert


def _exponent(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("p must be a number")
    if v < 1:
        raise argparse.ArgumentTypeError("p must be >= 1")
    return v


def _problem(text):
    try:
        return ProblemKind.from_label(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _density_arg(spec: str, d: int):
    if spec in (None, "uniform"):
        return None
    if spec.startswith("holder:"):
        return read_density_grid(spec.split(":", 1)[1], Cube.make(1, dim=d))
    raise argparse.ArgumentTypeError(f"unknown density spec {spec!r}")


def _domain_arg(spec: str):
    if spec is None:
        return None
    if spec.startswith("cube:"):
        return Cube.make(spec.split(":", 1)[1], dim=3)
    if spec.startswith("polycube:"):
        return read_polycube(spec.split(":", 1)[1])
    raise argparse.ArgumentTypeError(f"unknown domain spec {spec!r}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ebopt",
        description="Bipartite Euclidean combinatorial optimization experiments")
    parser.add_argument("--config", help="flat key = value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, problem=True):
        if problem:
            sp.add_argument("--problem", type=_problem,
                            help="matching | tsp | connected_kfactorK | "
                                 "kfactorK | kbounded_mstK")
        sp.add_argument("--d", type=_positive_int("d"))
        sp.add_argument("--p", type=_exponent, default=None)
        sp.add_argument("--n-list", type=_n_list, dest="n_list")
        sp.add_argument("--trials", type=_positive_int("trials"))
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--workers", type=_positive_int("workers"), default=None)
        sp.add_argument("--out", help="output path prefix")
        sp.add_argument("--timings", action="store_true", default=None,
                        help="record wall times (makes CSV non-reproducible)")

    sp = sub.add_parser("run-scaling", help="scaling-law experiment")
    common(sp)
    sp.add_argument("--density", help="uniform | holder:<grid file>")
    sp.add_argument("--solver", choices=["auto", "exact", "heuristic"],
                    default="auto")

    sp = sub.add_parser("run-d2log", help="d=2 logarithmic correction check")
    common(sp, problem=False)

    sp = sub.add_parser("run-subadditivity", help="partition subadditivity defect")
    common(sp)
    sp.add_argument("--L", type=float, default=None)
    sp.add_argument("--m", type=_positive_int("m"), default=None)
    sp.add_argument("--eta", type=float, default=None)

    sp = sub.add_parser("run-growth", help="growth constant measurement")
    common(sp)
    sp.add_argument("--mode", choices=["uniform", "adversarial"], default="uniform")

    sp = sub.add_parser("run-concentration", help="variance-scaling check")
    common(sp)

    sp = sub.add_parser("run-mixture", help="good/bad mixture matching")
    common(sp, problem=False)
    sp.add_argument("--bad-rule", choices=["zero", "sqrt", "equal"],
                    dest="bad_rule", default="sqrt")

    sp = sub.add_parser("solve-one", help="solve a single instance from CSV files")
    sp.add_argument("--problem", type=_problem, required=True)
    sp.add_argument("--p", type=_exponent, required=True)
    sp.add_argument("--x-file", required=True)
    sp.add_argument("--y-file", required=True)
    sp.add_argument("--mode", choices=["exact", "heuristic", "brute"],
                    default="exact")
    sp.add_argument("--out", help="write the solution edge list CSV here")

    sp = sub.add_parser("verify-oracles", help="brute-force agreement suite")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--trials", type=_positive_int("trials"), default=25)

    return parser


def _apply_config(args, parser):
    if not args.config:
        return args
    try:
        values = _parse_config_file(args.config)
    except ValueError as exc:
        parser.error(str(exc))
    converters = {
        "problem": _problem, "d": int, "p": _exponent, "n-list": _n_list,
        "trials": int, "seed": int, "workers": int, "density": str,
        "domain": str, "out": str, "mode": str, "kappa": int, "eta": float,
        "L": float, "m": int, "bad-rule": str,
        "timings": lambda s: s.lower() in ("1", "true", "yes"),
    }
    for key, raw in values.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            continue
        if getattr(args, attr) is None or getattr(args, attr) is False:
            try:
                setattr(args, attr, converters[key](raw))
            except (ValueError, argparse.ArgumentTypeError) as exc:
                parser.error(f"config key {key!r}: {exc}")
    return args


def _resolve_seed(args, parser):
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("EB_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            parser.error(f"EB_SEED must be an integer, got {env!r}")
    return 0


def _read_points_csv(path: str) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#") or line[0].isalpha():
                continue
            rows.append([float(v) for v in line.split(",")])
    if not rows:
        raise ValueError(f"no points in {path}")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError(f"ragged rows in {path}")
    return np.array(rows)


def _write_outputs(prefix, records=None, fit=None, report=None):
    if prefix is None:
        return
    if records is not None:
        records_to_csv(prefix + ".trials.csv", records)
    if fit is not None:
        scaling_fit_to_jsonl(prefix + ".fit.jsonl", fit)
    if report is not None:
        def clean(obj):
            if isinstance(obj, dict):
                return {k: clean(v) for k, v in obj.items()
                        if k not in ("records", "per_trial", "results")}
            if isinstance(obj, (list, tuple)):
                return [clean(v) for v in obj]
            if isinstance(obj, (np.floating, np.integer)):
                return obj.item()
            return obj
        with open(prefix + ".summary.json", "w") as fh:
            json.dump(clean(report), fh, indent=2, default=str)


def _cmd_run_scaling(args, parser):
    seed = _resolve_seed(args, parser)
    kind = args.problem or parser.error("--problem is required")
    d = args.d or 3
    p = args.p if args.p is not None else 1.0
    density = _density_arg(getattr(args, "density", None), d)
    fit = scaling_experiment(kind, d, p, density, args.n_list or [250, 500, 1000],
                             args.trials or 50, seed, workers=args.workers or 1,
                             solver=getattr(args, "solver", "auto"),
                             timings=bool(args.timings))
    _write_outputs(args.out, records=fit.records, fit=fit)
    print(f"scaling {kind.label()} d={d} p={p}: beta_hat={fit.beta_hat:.6f} "
          f"slope={fit.slope} ci99={fit.slope_ci99}"
          + (" [outside theorem range p >= d]" if fit.outside_theorem_range else ""))
    return EXIT_OK


def _cmd_run_d2log(args, parser):
    seed = _resolve_seed(args, parser)
    rep = d2_log_correction(args.trials or 32,
                            args.n_list or [512, 1024, 2048, 4096],
                            seed, d=args.d or 2, workers=args.workers or 1)
    _write_outputs(args.out, records=rep.get("records"), report=rep)
    print(f"d2log: r1 trend={rep['spearman_r1']} r2 top trend="
          f"{rep['spearman_r2_top']} passes={rep.get('passes')} "
          f"two_stage={rep.get('passes_two_stage')}")
    return EXIT_OK


def _cmd_run_subadditivity(args, parser):
    seed = _resolve_seed(args, parser)
    kind = args.problem or parser.error("--problem is required")
    rep = subadditivity_defect(kind, args.L or 4.0, args.m or 2,
                               args.eta if args.eta is not None else 0.2,
                               args.p if args.p is not None else 1.0,
                               seed, args.trials or 100, d=args.d or 3,
                               workers=args.workers or 1)
    _write_outputs(args.out, report=rep)
    print(f"subadditivity {kind.label()}: holds_all={rep['holds_all']} "
          f"skip_rate={rep['skip_rate']:.3f} measured_C={rep['max_measured_c']}")
    return EXIT_OK


def _cmd_run_growth(args, parser):
    seed = _resolve_seed(args, parser)
    kind = args.problem or parser.error("--problem is required")
    rep = growth_check(kind, args.d or 3, args.p if args.p is not None else 1.0,
                       args.n_list or [100, 200, 400], args.trials or 8, seed,
                       mode=args.mode, workers=args.workers or 1)
    _write_outputs(args.out, report=rep)
    print(f"growth {kind.label()} ({args.mode}): c_A5={rep['c_a5']:.4f} "
          f"drift={rep['drift']:.3f} c_lemma={rep['c_lemma']:.4f}")
    return EXIT_OK


def _cmd_run_concentration(args, parser):
    seed = _resolve_seed(args, parser)
    kind = args.problem or parser.error("--problem is required")
    rep = concentration_check(kind, args.d or 3,
                              args.p if args.p is not None else 1.0,
                              args.n_list or [128, 256, 512], args.trials or 100,
                              seed, workers=args.workers or 1)
    moments = {
        "poisson": poisson_moment_check([4, 16, 64, 256], 20000, seed + 1),
        "hypergeometric": hypergeometric_moment_check([4, 16, 64], 20000, seed + 2),
    }
    rep["moment_checks"] = moments
    _write_outputs(args.out, records=rep.get("records"), report=rep)
    print(f"concentration {kind.label()}: sd slope={rep['slope']} "
          f"threshold={rep['threshold']:.4f} passes={rep['passes']} "
          f"poisson_max={moments['poisson']['max_ratio']:.3f}")
    return EXIT_OK


def _cmd_run_mixture(args, parser):
    seed = _resolve_seed(args, parser)
    rep = mixture_matching(args.d or 3, args.p if args.p is not None else 1.0,
                           args.n_list or [250, 500, 1000], args.bad_rule,
                           args.trials or 20, seed, workers=args.workers or 1)
    _write_outputs(args.out, report=rep)
    print(f"mixture ({args.bad_rule}): max normalized ratio vs baseline = "
          f"{rep['max_ratio']:.4f}")
    return EXIT_OK


def _cmd_solve_one(args, parser):
    x = _read_points_csv(args.x_file)
    y = _read_points_csv(args.y_file)
    kind = args.problem
    p = args.p
    if args.mode == "brute":
        rep = brute_force(kind, x, y, p)
    elif args.mode == "heuristic":
        rep = solve_heuristic(kind, x, y, p)
    elif kind.name == "matching":
        rep = solve_matching_exact(x, y, p)
    elif kind.name == "tsp":
        rep = solve_bipartite_tsp_exact(x, y, p)
    else:
        rep = brute_force(kind, x, y, p)
    inst = BipartiteInstance(x, y, p, kind)
    check = is_feasible(inst, rep.solution)
    print(f"problem={kind.label()} n={len(x)} m={len(y)} p={p} "
          f"method={rep.method} cost={rep.solution.cost!r} feasible={check.ok}")
    for i, j in rep.solution.edges:
        print(f"{i},{j}")
    if args.out:
        solution_to_csv(args.out, inst, rep.solution)
    return EXIT_OK


def _cmd_verify_oracles(args, parser):
    from .oracles import run_oracle_suite

    seed = _resolve_seed(args, parser)
    report = run_oracle_suite(seed=seed, instances=args.trials)
    worst = report["max_relative_gap"]
    for line in report["lines"]:
        print(line)
    print(f"verify-oracles: {report['checks']} checks, "
          f"max relative gap {worst:.3e}")
    return EXIT_OK if report["ok"] else 1


_COMMANDS = {
    "run-scaling": _cmd_run_scaling,
    "run-d2log": _cmd_run_d2log,
    "run-subadditivity": _cmd_run_subadditivity,
    "run-growth": _cmd_run_growth,
    "run-concentration": _cmd_run_concentration,
    "run-mixture": _cmd_run_mixture,
    "solve-one": _cmd_solve_one,
    "verify-oracles": _cmd_verify_oracles,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    args = _apply_config(args, parser)
    try:
        return _COMMANDS[args.command](args, parser)
    except SizeLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIZE_CAP
    except (OSError, IOError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InvalidDomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
