"""Command-line interface: one-shot solves and sweep experiments.

Exit codes: 0 success, 2 bad config/scenario, 3 infeasible (or a sweep with
no feasible instance anywhere), 4 numerical failure inside a solver.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .harness import (
    MULTI_SCHEMES,
    SINGLE_SCHEMES,
    emit_results,
    load_config,
    parse_params,
    run_experiment,
)
from .model import (
    LOG2E,
    ScenarioMulti,
    ScenarioSingle,
    generate_scenario_multi,
    generate_scenario_single,
)
from .multi_benchmarks import solve_fixed_alpha_multi, solve_nearest_association
from .multi_solver import NumericalFailure, solve_multi
from .single_benchmarks import (
    solve_dinkelbach_single,
    solve_fixed_alpha,
    solve_se_max,
)
from .single_optimal import solve_single_optimal

__all__ = ["main"]


def _load_scenario(path, want_multi):
    with open(path) as fh:
        d = json.load(fh)
    if "generate" in d:
        g = dict(d["generate"])
        params = parse_params(g.pop("params", None) or {})
        n_ports = int(g.pop("n_ports"))
        seed = int(g.pop("seed"))
        cap = float(g.pop("power_cap"))
        min_harvest = g.pop("min_harvest")
        n_devices = g.pop("n_devices", None)
        if g:
            raise ValueError(f"unknown generate keys: {sorted(g)}")
        if want_multi:
            if n_devices is None:
                raise ValueError("multi-device scenario needs n_devices")
            return generate_scenario_multi(n_ports, int(n_devices), seed,
                                           params, cap, float(min_harvest))
        if n_devices not in (None, 1):
            raise ValueError("single-device scenario cannot set n_devices > 1")
        return generate_scenario_single(n_ports, seed, params, cap,
                                        float(min_harvest))
    params = parse_params(d.get("params") or {})
    gains = np.asarray(d["gains"], dtype=float)
    if "power_caps" in d:
        caps = np.asarray(d["power_caps"], dtype=float)
    else:
        caps = np.full(gains.shape[0], float(d["power_cap"]))
    if want_multi:
        if gains.ndim != 2:
            raise ValueError("multi-device scenario needs a 2-D gains matrix")
        e_min = d["min_harvest"]
        if np.isscalar(e_min):
            e_min = np.full(gains.shape[1], float(e_min))
        return ScenarioMulti(gains=gains, power_caps=caps,
                             min_harvest=np.asarray(e_min, dtype=float),
                             params=params)
    if gains.ndim != 1:
        raise ValueError("single-device scenario needs a 1-D gains vector")
    return ScenarioSingle(gains=gains, power_caps=caps,
                          min_harvest=float(d["min_harvest"]), params=params)


def _stats_dict(stats):
    return {
        "outer_iterations": stats.outer_iterations,
        "inner_iterations": stats.inner_iterations,
        "converged": stats.converged,
        "final_residual": stats.final_residual,
    }


def _cmd_solve_single(args):
    scenario = _load_scenario(args.scenario, want_multi=False)
    if args.scheme == "optimal":
        sol = solve_single_optimal(scenario)
    elif args.scheme == "dinkelbach":
        sol = solve_dinkelbach_single(scenario)
    elif args.scheme == "fixed-alpha":
        sol = solve_fixed_alpha(scenario, args.alpha)
    else:
        sol = solve_se_max(scenario)
    out = {
        "feasible": sol.feasible,
        "ee_nats_per_joule": sol.ee,
        "ee_bits_per_joule": sol.ee * LOG2E,
        "rate_nats": sol.rate,
        "harvested_watts": sol.harvested,
        "ps_ratio": sol.ps_ratio,
        "powers_watts": sol.powers.tolist(),
        "stats": _stats_dict(sol.stats),
    }
    print(json.dumps(out, indent=2))
    return 0 if sol.feasible else 3


def _cmd_solve_multi(args):
    scenario = _load_scenario(args.scenario, want_multi=True)
    if args.scheme == "proposed":
        sol = solve_multi(scenario)
    elif args.scheme == "fixed-alpha":
        sol = solve_fixed_alpha_multi(scenario, args.alpha)
    else:
        sol = solve_nearest_association(scenario)
    out = {
        "feasible": sol.feasible,
        "ee_nats_per_joule": sol.ee,
        "ee_bits_per_joule": sol.ee * LOG2E,
        "rates_nats": sol.rates.tolist(),
        "harvested_watts": sol.harvested.tolist(),
        "ps_ratios": sol.ps_ratios.tolist(),
        "powers_watts": sol.powers.tolist(),
        "stats": _stats_dict(sol.stats),
    }
    print(json.dumps(out, indent=2))
    return 0 if sol.feasible else 3


def _cmd_experiment(args):
    config = load_config(args.config, base_seed=args.seed,
                         n_realizations=args.realizations)
    result = run_experiment(config, threads=args.threads)
    csv_path, sidecar_path = emit_results(result, args.out)
    for row in result.rows:
        print(f"{row.scheme} {config.sweep_kind}={row.sweep_value:g}: "
              f"mean EE {row.ee_mean_nats:.6g} nats/J "
              f"({row.n_feasible}/{row.n_total} feasible)")
    print(f"wrote {csv_path} and {sidecar_path}")
    if result.numerical_failures:
        print(f"numerical failures: {result.numerical_failures}",
              file=sys.stderr)
    if all(row.n_feasible == 0 for row in result.rows):
        return 3
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="swiptdas",
        description="Energy-efficiency optimization for SWIPT distributed "
                    "antenna systems.",
    )
    parser.add_argument("--log-level", default="warning",
                        choices=["debug", "info", "warning", "error"],
                        help="logging verbosity (default: warning)")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for experiments; 0 = all cores")
    sub = parser.add_subparsers(dest="command", required=True)

    p1 = sub.add_parser("solve-single", help="solve one single-device scenario")
    p1.add_argument("--scenario", required=True, help="scenario JSON file")
    p1.add_argument("--scheme", required=True,
                    choices=list(SINGLE_SCHEMES))
    p1.add_argument("--alpha", type=float, default=0.5,
                    help="splitting ratio for the fixed-alpha scheme")
    p1.set_defaults(func=_cmd_solve_single)

    p2 = sub.add_parser("solve-multi", help="solve one multi-device scenario")
    p2.add_argument("--scenario", required=True, help="scenario JSON file")
    p2.add_argument("--scheme", required=True, choices=list(MULTI_SCHEMES))
    p2.add_argument("--alpha", type=float, default=0.5,
                    help="splitting ratio for the fixed-alpha scheme")
    p2.set_defaults(func=_cmd_solve_multi)

    p3 = sub.add_parser("experiment", help="run a Monte-Carlo sweep")
    p3.add_argument("--config", required=True, help="experiment config JSON")
    p3.add_argument("--out", required=True, help="output directory")
    p3.add_argument("--seed", type=int, default=None,
                    help="override the config's base seed")
    p3.add_argument("--realizations", type=int, default=None,
                    help="override the config's realization count")
    p3.set_defaults(func=_cmd_experiment)
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper()),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except (ValueError, KeyError, TypeError, OSError,
            json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
