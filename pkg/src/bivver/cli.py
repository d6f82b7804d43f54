"""Command-line surface for the toolkit.

Subcommands
-----------
strategy  build a named-family strategy for a state and report v plus diagnostics
optimize  run the convex relaxation for a state, dump the solution JSON
sweep     tabulate spectral gaps over a parameter grid as CSV (or JSON rows)
simulate  Monte Carlo protocol runs against worst-case or supplied states
copies    sample-size calculator for a target infidelity and confidence

State JSON is {"schmidt": [...]} or {"amplitudes": [[[re, im], ...], ...]}.
Arguments taking JSON (--state, --strategy, --sigma) accept either a file
path or the JSON text itself. Exit codes: 0 success, 2 usage or validation
error, 3 solver non-convergence. All output is deterministic; sweeps honor
the BIVVER_THREADS environment variable as a parallelism cap.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import constructors
from .protocol import (
    STOP_ON_FAIL,
    chernoff_confidence,
    confidence_iid,
    copies_needed,
    report_to_dict,
    simulate,
    worst_case_state,
)
from .relaxation import (
    SolverNonConvergence,
    SolverOptions,
    ppt_min_eigenvalue,
    reconstruct_omega,
    solution_to_dict,
    solve_one_way_relaxation,
    solve_two_way_relaxation,
)
from .states import DensityOperator, from_schmidt, matrix_from_pairs, state_from_dict
from .strategy import (
    Strategy,
    strategy_from_dict,
    strategy_to_dict,
    validate_semi_optimal_one_way,
    validate_two_way,
)

USAGE_ERROR = 2
SOLVER_ERROR = 3

_FAMILIES = ("one-way", "two-way-2qubit", "two-way-near")
_SWEEP_FAMILIES = ("two-qubit", "qutrit")


class UsageError(Exception):
    """Bad input or option combination; maps to exit code 2."""


def _load_json_arg(text: str, what: str) -> dict:
    if text is None:
        raise UsageError(f"{what} is required")
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            return json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{what}: invalid inline JSON: {exc}") from exc
    if os.path.exists(text):
        try:
            with open(text, "r", encoding="utf-8") as fh:
                return json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{what}: file {text!r} is not valid JSON: {exc}") from exc
    raise UsageError(f"{what}: {text!r} is neither an existing file nor inline JSON")


def _load_state(arg: str):
    try:
        return state_from_dict(_load_json_arg(arg, "--state"))
    except ValueError as exc:
        raise UsageError(f"--state: {exc}") from exc


def _load_strategy(arg: str) -> Strategy:
    try:
        return strategy_from_dict(_load_json_arg(arg, "--strategy"))
    except ValueError as exc:
        raise UsageError(f"--strategy: {exc}") from exc


def _load_sigma(arg: str) -> DensityOperator:
    obj = _load_json_arg(arg, "--sigma")
    try:
        dims = tuple(int(x) for x in obj["dims"])
        matrix = matrix_from_pairs(obj["matrix"])
        return DensityOperator(matrix, dims)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"--sigma: expected {{'matrix': pairs, 'dims': [da, db]}}: {exc}") from exc


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(text: str, output: str | None):
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _thread_cap() -> int:
    raw = os.environ.get("BIVVER_THREADS", "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        cap = int(raw)
    except ValueError as exc:
        raise UsageError(f"BIVVER_THREADS must be an integer, got {raw!r}") from exc
    if cap < 1:
        raise UsageError(f"BIVVER_THREADS must be >= 1, got {cap}")
    return cap


def _build_family(family: str, state) -> Strategy:
    if family == "one-way":
        return constructors.one_way_optimal(state)
    if family == "two-way-near":
        return constructors.near_optimal_two_way(state)
    if family == "two-way-2qubit":
        if state.d != 2:
            raise UsageError(f"--family two-way-2qubit needs a d=2 state, got d={state.d}")
        return constructors.two_qubit_two_way(constructors.two_qubit_theta(state))
    raise UsageError(f"unknown family {family!r}")


def _validation_dict(report) -> dict:
    return {
        "checks": {
            name: {"passed": bool(c.passed), "residual": float(c.residual)}
            for name, c in report.checks.items()
        },
        "flagged_branches": [list(b) for b in report.flagged_branches],
        "ok": bool(report.ok),
    }


def cmd_strategy(args) -> int:
    state = _load_state(args.state)
    try:
        strategy = _build_family(args.family, state)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.family == "one-way":
        report = validate_semi_optimal_one_way(strategy)
    else:
        report = validate_two_way(strategy)
    summary = {
        "family": args.family,
        "d": strategy.d,
        "v": strategy.v,
        "w": strategy.tests[0][0],
        "weights": [p for p, _ in strategy.tests],
        "validation": _validation_dict(report),
    }
    payload = strategy_to_dict(strategy)
    if args.output:
        _emit(_dump_json(payload), args.output)
        sys.stdout.write(_dump_json(summary))
    else:
        summary["strategy"] = payload
        sys.stdout.write(_dump_json(summary))
    return 0


def _solver_options(args) -> SolverOptions:
    try:
        return SolverOptions(
            tol_outer=args.tol_outer, tol_inner=args.tol_inner, max_iter=args.max_iter
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_optimize(args) -> int:
    state = _load_state(args.state)
    opts = _solver_options(args)
    solve = solve_one_way_relaxation if args.mode == "one-way" else solve_two_way_relaxation
    sol = solve(state, opts)
    omega = reconstruct_omega(sol)
    pt_min = ppt_min_eigenvalue(omega, (state.d, state.d))
    summary = {
        "mode": sol.mode,
        "value": sol.value,
        "converged": bool(sol.converged),
        "iterations": sol.iterations,
        "residuals": {k: float(r) for k, r in sol.residuals.items()},
        "ppt_min_eigenvalue": pt_min,
        "ppt_ok": bool(pt_min >= -1e-8),
    }
    payload = solution_to_dict(sol)
    if args.output:
        _emit(_dump_json(payload), args.output)
        sys.stdout.write(_dump_json(summary))
    else:
        summary["solution"] = payload
        sys.stdout.write(_dump_json(summary))
    return 0


def _sweep_state(family: str, theta: float):
    if family == "two-qubit":
        return from_schmidt([math.cos(theta), math.sin(theta)])
    # one-parameter qutrit family interpolating to the maximally entangled state
    a = math.sqrt(2.0 / 3.0)
    return from_schmidt([a * math.cos(theta), math.sqrt(1.0 / 3.0), a * math.sin(theta)])


def _sweep_grid(args) -> list:
    if args.steps < 1:
        raise UsageError(f"--steps must be >= 1, got {args.steps}")
    if args.theta_min is not None or args.theta_max is not None:
        lo = 0.0 if args.theta_min is None else args.theta_min
        hi = math.pi / 4 if args.theta_max is None else args.theta_max
        if not lo <= hi:
            raise UsageError("--theta-min must not exceed --theta-max")
        return list(np.linspace(lo, hi, args.steps))
    # default grid: steps points in (0, pi/4], endpoint included, zero excluded
    return [(math.pi / 4) * k / args.steps for k in range(1, args.steps + 1)]


def cmd_sweep(args) -> int:
    thetas = _sweep_grid(args)
    opts = _solver_options(args)

    def point(theta: float) -> dict:
        state = _sweep_state(args.family, theta)
        row = {
            "theta": theta,
            "v_one_way": constructors.one_way_optimal(state).v,
            "v_two_way_near": constructors.near_optimal_two_way(state).v,
        }
        if args.numeric:
            sol = solve_two_way_relaxation(state, opts)
            row["v_two_way_numeric"] = sol.value
            row["ratio"] = sol.value / row["v_two_way_near"]
        return row

    cap = min(_thread_cap(), len(thetas))
    if cap <= 1:
        rows = [point(t) for t in thetas]
    else:
        with ThreadPoolExecutor(max_workers=cap) as pool:
            rows = list(pool.map(point, thetas))

    if args.format == "json":
        _emit(_dump_json(rows), args.output)
        return 0
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["theta", "v_one_way", "v_two_way_near", "v_two_way_numeric", "ratio"])
    for row in rows:
        writer.writerow(
            [f"{row['theta']:.17g}", f"{row['v_one_way']:.17g}", f"{row['v_two_way_near']:.17g}"]
            + (
                [f"{row['v_two_way_numeric']:.17g}", f"{row['ratio']:.17g}"]
                if args.numeric
                else ["", ""]
            )
        )
    _emit(buf.getvalue(), args.output)
    return 0


def cmd_simulate(args) -> int:
    strategy = _load_strategy(args.strategy)
    if (args.epsilon is None) == (args.sigma is None):
        raise UsageError("exactly one of --epsilon and --sigma is required")
    if args.epsilon is not None:
        if not 0.0 <= args.epsilon <= 1.0:
            raise UsageError(f"--epsilon must lie in [0, 1], got {args.epsilon}")
        sigma = worst_case_state(strategy, epsilon=args.epsilon)
    else:
        sigma = _load_sigma(args.sigma)
    try:
        report = simulate(
            strategy, sigma, copies=args.copies, seed=args.seed,
            mode=args.mode, trials=args.trials,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    v = strategy.v
    summary = report_to_dict(report)
    summary["v"] = v
    summary["epsilon"] = args.epsilon
    bound = None
    chernoff = None
    if args.epsilon is not None and args.epsilon > 0.0:
        bound = confidence_iid(v, args.epsilon, args.copies)
        if report.mode != STOP_ON_FAIL:
            frac = report.passes / report.trials
            if frac > 1.0 - args.epsilon * v:
                chernoff = chernoff_confidence(frac, v, args.epsilon, report.trials)
    summary["confidence_bound"] = bound
    summary["chernoff_bound"] = chernoff
    _emit(_dump_json(summary), args.output)
    return 0


def cmd_copies(args) -> int:
    if (args.v is None) == (args.strategy is None):
        raise UsageError("exactly one of --v and --strategy is required")
    v = args.v if args.v is not None else _load_strategy(args.strategy).v
    try:
        n = copies_needed(v, args.epsilon, args.delta)
        conf = confidence_iid(v, args.epsilon, n)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    summary = {
        "copies": n,
        "v": v,
        "epsilon": args.epsilon,
        "delta": args.delta,
        "confidence_at_copies": conf,
    }
    _emit(_dump_json(summary), args.output)
    return 0


def _add_solver_flags(p: argparse.ArgumentParser):
    p.add_argument("--tol-outer", type=float, default=1e-5,
                   help="bisection tolerance on the reported value")
    p.add_argument("--tol-inner", type=float, default=1e-8,
                   help="feasibility residual tolerance")
    p.add_argument("--max-iter", type=int, default=20000,
                   help="projection sweep budget per feasibility run")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bivver",
        description="Construct, optimize, and simulate verification strategies "
        "for bipartite pure states.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("strategy", help="build a named-family strategy")
    p.add_argument("--family", required=True, choices=_FAMILIES)
    p.add_argument("--state", required=True, help="state JSON (file or inline)")
    p.add_argument("--output", help="write strategy JSON here instead of stdout")
    p.set_defaults(func=cmd_strategy)

    p = sub.add_parser("optimize", help="run the convex relaxation")
    p.add_argument("--state", required=True, help="state JSON (file or inline)")
    p.add_argument("--mode", choices=("one-way", "two-way"), default="two-way")
    p.add_argument("--output", help="write solution JSON here instead of stdout")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", help="tabulate v over a parameter grid")
    p.add_argument("--family", required=True, choices=_SWEEP_FAMILIES)
    p.add_argument("--steps", type=int, default=64, help="number of grid points")
    p.add_argument("--theta-min", type=float, default=None,
                   help="inclusive grid start (default: pi/4 / steps)")
    p.add_argument("--theta-max", type=float, default=None,
                   help="inclusive grid end (default: pi/4)")
    p.add_argument("--numeric", action="store_true",
                   help="also run the two-way relaxation per point")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--output", help="write table here instead of stdout")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="Monte Carlo protocol runs")
    p.add_argument("--strategy", required=True, help="strategy JSON (file or inline)")
    p.add_argument("--epsilon", type=float, default=None,
                   help="simulate the worst-case state at this infidelity")
    p.add_argument("--sigma", default=None,
                   help="explicit density matrix JSON {'matrix': pairs, 'dims': [da, db]}")
    p.add_argument("--copies", type=int, default=1)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("stop-on-fail", "frequency"), default="stop-on-fail")
    p.add_argument("--output", help="write report JSON here instead of stdout")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("copies", help="copies needed for (epsilon, delta)")
    p.add_argument("--v", type=float, default=None, help="spectral gap of the strategy")
    p.add_argument("--strategy", default=None, help="strategy JSON (file or inline)")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--output", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_copies)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return USAGE_ERROR
    except SolverNonConvergence as exc:
        sys.stderr.write(f"error: {exc}\n")
        sys.stderr.write(_dump_json({"best_value": exc.best.value}))
        return SOLVER_ERROR


if __name__ == "__main__":
    sys.exit(main())
