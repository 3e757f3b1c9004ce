"""Monte-Carlo experiment runner: sweeps, aggregation, file emission.

An experiment sweeps one scenario knob (harvest floor, power cap, port
count, or device count), draws `n_realizations` random scenarios per sweep
value, solves every requested scheme on the identical scenario, and
aggregates EE over the feasible instances. The realization seed is
`base_seed XOR r`, independent of the sweep value, so sweep points share
common random numbers. Results go to a CSV plus a JSON sidecar that can be
fed back in to reproduce the CSV byte-for-byte.
"""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .model import (
    LOG2E,
    SystemParams,
    dbm_to_watts,
    default_system_params,
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

__all__ = [
    "SINGLE_SCHEMES",
    "MULTI_SCHEMES",
    "ExperimentConfig",
    "ResultRow",
    "ExperimentResult",
    "run_experiment",
    "emit_results",
    "load_config",
    "config_from_dict",
    "config_to_dict",
]

logger = logging.getLogger(__name__)

SINGLE_SCHEMES = ("optimal", "dinkelbach", "fixed-alpha", "se-max")
MULTI_SCHEMES = ("proposed", "fixed-alpha", "nearest")
_SWEEP_KINDS = ("min_harvest", "power_cap", "n_ports", "n_devices")


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of a sweep experiment (deterministic given this)."""

    sweep_kind: str
    sweep_values: tuple
    schemes: tuple
    n_realizations: int
    base_seed: int
    n_ports: int | None = None
    n_devices: int | None = None
    power_cap: float | None = None
    min_harvest: float | None = None
    alpha: float = 0.5
    alpha_grid_step: float = 0.01
    n_topologies: int | None = None
    params: SystemParams = None

    def __post_init__(self):
        if self.params is None:
            object.__setattr__(self, "params", default_system_params())
        if self.sweep_kind not in _SWEEP_KINDS:
            raise ValueError(f"sweep_kind must be one of {_SWEEP_KINDS}")
        values = tuple(float(v) for v in self.sweep_values)
        if not values:
            raise ValueError("sweep_values must be non-empty")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("sweep_values must be strictly increasing")
        object.__setattr__(self, "sweep_values", values)
        schemes = tuple(self.schemes)
        if not schemes:
            raise ValueError("schemes must be non-empty")
        if len(set(schemes)) != len(schemes):
            raise ValueError("schemes must not repeat")
        allowed = MULTI_SCHEMES if self.is_multi else SINGLE_SCHEMES
        for s in schemes:
            if s not in allowed:
                raise ValueError(f"unknown scheme {s!r} (allowed: {allowed})")
        object.__setattr__(self, "schemes", schemes)
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        if not 0 <= int(self.base_seed) < 2 ** 64:
            raise ValueError("base_seed must fit in an unsigned 64-bit integer")
        if self.sweep_kind in ("n_ports", "n_devices"):
            if any(v != int(v) or v < 1 for v in values):
                raise ValueError(f"{self.sweep_kind} sweep values must be positive integers")
        if self.sweep_kind != "n_ports" and (self.n_ports is None or self.n_ports < 1):
            raise ValueError("n_ports is required (and positive) unless swept")
        if self.sweep_kind != "power_cap" and (self.power_cap is None or self.power_cap <= 0):
            raise ValueError("power_cap is required (and positive) unless swept")
        if self.sweep_kind != "min_harvest" and (self.min_harvest is None or self.min_harvest < 0):
            raise ValueError("min_harvest is required (and non-negative) unless swept")
        if self.is_multi and self.sweep_kind != "n_devices" and (
                self.n_devices is None or self.n_devices < 1):
            raise ValueError("n_devices must be a positive integer for multi-device runs")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.is_multi and "fixed-alpha" in schemes and not self.alpha < 1.0:
            raise ValueError("multi-device fixed-alpha requires alpha < 1")
        if not 0.0 < self.alpha_grid_step <= 0.1:
            raise ValueError("alpha_grid_step must lie in (0, 0.1]")
        if self.n_topologies is not None and self.n_topologies < 1:
            raise ValueError("n_topologies must be >= 1 when given")

    @property
    def is_multi(self):
        return self.n_devices is not None or self.sweep_kind == "n_devices"


@dataclass(frozen=True)
class ResultRow:
    """Aggregated EE statistics for one (scheme, sweep value) cell."""

    scheme: str
    sweep_value: float
    ee_mean_nats: float
    ee_std: float
    ci95: float
    n_feasible: int
    n_total: int


@dataclass(frozen=True)
class ExperimentResult:
    """Aggregated rows plus the raw per-realization EE samples (NaN = infeasible)."""

    config: ExperimentConfig
    rows: tuple
    raw: dict
    numerical_failures: int


def _scenario_for(config, value, r):
    n_ports = config.n_ports
    n_devices = config.n_devices
    cap = config.power_cap
    e_min = config.min_harvest
    kind = config.sweep_kind
    if kind == "min_harvest":
        e_min = value
    elif kind == "power_cap":
        cap = value
    elif kind == "n_ports":
        n_ports = int(value)
    else:
        n_devices = int(value)
    if config.n_topologies is None:
        seed = int(config.base_seed) ^ r
        fading_seed = None
    else:
        seed = (int(config.base_seed), r % config.n_topologies)
        fading_seed = (int(config.base_seed), r, 1)
    if config.is_multi:
        return generate_scenario_multi(n_ports, n_devices, seed, config.params,
                                       cap, e_min, fading_seed)
    return generate_scenario_single(n_ports, seed, config.params, cap, e_min,
                                    fading_seed)


def _dispatch(scheme, scenario, config):
    if scheme == "optimal":
        return solve_single_optimal(scenario)
    if scheme == "dinkelbach":
        return solve_dinkelbach_single(scenario, config.alpha_grid_step)
    if scheme == "se-max":
        return solve_se_max(scenario)
    if scheme == "proposed":
        return solve_multi(scenario)
    if scheme == "nearest":
        return solve_nearest_association(scenario)
    if scheme == "fixed-alpha":
        if config.is_multi:
            return solve_fixed_alpha_multi(scenario, config.alpha)
        return solve_fixed_alpha(scenario, config.alpha)
    raise ValueError(f"unknown scheme {scheme!r}")


def _solve_one(config, value, r):
    scenario = _scenario_for(config, value, r)
    out = {}
    failures = 0
    for scheme in config.schemes:
        try:
            sol = _dispatch(scheme, scenario, config)
        except NumericalFailure:
            failures += 1
            out[scheme] = math.nan
            continue
        out[scheme] = sol.ee if sol.feasible else math.nan
    return out, failures


def run_experiment(config, threads=1):
    """Run the sweep and aggregate; deterministic, serial or threaded."""
    values = config.sweep_values
    n = config.n_realizations
    jobs = [(vi, r) for vi in range(len(values)) for r in range(n)]
    cell = {}
    if threads == 0:
        threads = os.cpu_count() or 1
    if threads <= 1:
        for vi, r in jobs:
            cell[(vi, r)] = _solve_one(config, values[vi], r)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {(vi, r): pool.submit(_solve_one, config, values[vi], r)
                       for vi, r in jobs}
        for key, fut in futures.items():
            cell[key] = fut.result()
    raw = {}
    failures = 0
    for vi, value in enumerate(values):
        for r in range(n):
            failures += cell[(vi, r)][1]
        for scheme in config.schemes:
            ee = np.array([cell[(vi, r)][0][scheme] for r in range(n)])
            raw[(scheme, value)] = ee
        logger.info("sweep %s=%g done (%d realizations)", config.sweep_kind,
                    value, n)
    rows = []
    for scheme in config.schemes:
        for value in values:
            ee = raw[(scheme, value)]
            feas = np.isfinite(ee)
            n_feas = int(feas.sum())
            if n_feas == 0:
                mean = std = ci = 0.0
            else:
                samples = ee[feas]
                mean = float(samples.mean())
                std = float(samples.std(ddof=1)) if n_feas >= 2 else 0.0
                ci = 1.96 * std / math.sqrt(n_feas)
            rows.append(ResultRow(
                scheme=scheme,
                sweep_value=value,
                ee_mean_nats=mean,
                ee_std=std,
                ci95=ci,
                n_feasible=n_feas,
                n_total=n,
            ))
    return ExperimentResult(
        config=config,
        rows=tuple(rows),
        raw=raw,
        numerical_failures=failures,
    )


def _fmt(x):
    return format(float(x), ".9g")


def emit_results(result, out_dir):
    """Write results.csv and a reproducing config.json sidecar; return paths."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "results.csv")
    sidecar_path = os.path.join(out_dir, "config.json")
    lines = ["scheme,sweep_param,sweep_value,ee_mean_nats,ee_mean_bits,"
             "ee_std,ci95,n_feasible,n_total"]
    kind = result.config.sweep_kind
    for row in result.rows:
        lines.append(",".join([
            row.scheme,
            kind,
            _fmt(row.sweep_value),
            _fmt(row.ee_mean_nats),
            _fmt(row.ee_mean_nats * LOG2E),
            _fmt(row.ee_std),
            _fmt(row.ci95),
            str(row.n_feasible),
            str(row.n_total),
        ]))
    with open(csv_path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    sidecar = config_to_dict(result.config)
    sidecar["_notes"] = {
        "sweep_defaults": "axis ranges are reconstructions, not published values",
        "numerical_failures": result.numerical_failures,
        "ee_units": "nats per joule (ee_mean_bits converts with log2(e))",
    }
    with open(sidecar_path, "w", newline="") as fh:
        fh.write(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return csv_path, sidecar_path


def params_to_dict(params):
    return {
        "noise_power": params.noise_power,
        "circuit_power": params.circuit_power,
        "conversion_efficiency": params.conversion_efficiency,
        "path_loss_exponent": params.path_loss_exponent,
        "square_side": params.square_side,
        "min_distance": params.min_distance,
        "fading": params.fading,
    }


def parse_params(d):
    """Build SystemParams from a dict; noise_power accepts a dBm unit tag."""
    base = params_to_dict(default_system_params())
    unknown = set(d) - set(base)
    if unknown:
        raise ValueError(f"unknown params keys: {sorted(unknown)}")
    merged = {**base, **d}
    noise = merged["noise_power"]
    if isinstance(noise, dict):
        extra = set(noise) - {"value", "unit"}
        if extra:
            raise ValueError(f"unknown noise_power keys: {sorted(extra)}")
        unit = noise.get("unit", "W")
        value = float(noise["value"])
        if unit == "dBm":
            merged["noise_power"] = dbm_to_watts(value)
        elif unit == "W":
            merged["noise_power"] = value
        else:
            raise ValueError("noise_power unit must be 'W' or 'dBm'")
    else:
        merged["noise_power"] = float(noise)
    for key in ("circuit_power", "conversion_efficiency", "path_loss_exponent",
                "square_side", "min_distance"):
        merged[key] = float(merged[key])
    return SystemParams(**merged)


def config_to_dict(config):
    return {
        "sweep_kind": config.sweep_kind,
        "sweep_values": list(config.sweep_values),
        "schemes": list(config.schemes),
        "n_realizations": config.n_realizations,
        "base_seed": config.base_seed,
        "n_ports": config.n_ports,
        "n_devices": config.n_devices,
        "power_cap": config.power_cap,
        "min_harvest": config.min_harvest,
        "alpha": config.alpha,
        "alpha_grid_step": config.alpha_grid_step,
        "n_topologies": config.n_topologies,
        "params": params_to_dict(config.params),
    }


def config_from_dict(d):
    known = {"sweep_kind", "sweep_values", "schemes", "n_realizations",
             "base_seed", "n_ports", "n_devices", "power_cap", "min_harvest",
             "alpha", "alpha_grid_step", "n_topologies", "params"}
    payload = {k: v for k, v in d.items() if not k.startswith("_")}
    unknown = set(payload) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    missing = {"sweep_kind", "sweep_values", "schemes", "n_realizations",
               "base_seed"} - set(payload)
    if missing:
        raise ValueError(f"missing config keys: {sorted(missing)}")
    params = parse_params(payload.get("params") or {})
    kwargs = {k: payload[k] for k in known - {"params"} if k in payload}
    kwargs["sweep_values"] = tuple(kwargs["sweep_values"])
    kwargs["schemes"] = tuple(kwargs["schemes"])
    return ExperimentConfig(params=params, **kwargs)


def load_config(path, base_seed=None, n_realizations=None):
    """Read an experiment config (or emitted sidecar), optional overrides."""
    with open(path) as fh:
        d = json.load(fh)
    config = config_from_dict(d)
    if base_seed is not None:
        config = replace(config, base_seed=base_seed)
    if n_realizations is not None:
        config = replace(config, n_realizations=n_realizations)
    return config
