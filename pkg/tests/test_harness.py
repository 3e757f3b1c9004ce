"""Unit tests for the Monte-Carlo experiment harness and its file formats."""

import json
import math
from dataclasses import replace

import numpy as np
import pytest

from swiptdas.harness import (
    ExperimentConfig,
    config_from_dict,
    config_to_dict,
    emit_results,
    load_config,
    parse_params,
    run_experiment,
)
from swiptdas.model import LOG2E, dbm_to_watts, default_system_params

EXPECTED_HEADER = ("scheme,sweep_param,sweep_value,ee_mean_nats,ee_mean_bits,"
                   "ee_std,ci95,n_feasible,n_total")


def _single_config(**over):
    base = dict(
        sweep_kind="min_harvest",
        sweep_values=(2e-4, 6e-4),
        schemes=("optimal", "se-max"),
        n_realizations=3,
        base_seed=77,
        n_ports=3,
        power_cap=2.0,
    )
    base.update(over)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        _single_config(sweep_kind="bandwidth")
    with pytest.raises(ValueError):
        _single_config(sweep_values=())
    with pytest.raises(ValueError):
        _single_config(sweep_values=(2e-4, 2e-4))
    with pytest.raises(ValueError):
        _single_config(sweep_values=(6e-4, 2e-4))
    with pytest.raises(ValueError):
        _single_config(schemes=("optimal", "optimal"))
    with pytest.raises(ValueError):
        _single_config(schemes=("proposed",))  # multi scheme on a single run
    with pytest.raises(ValueError):
        _single_config(n_realizations=0)
    with pytest.raises(ValueError):
        _single_config(base_seed=-1)
    with pytest.raises(ValueError):
        _single_config(base_seed=2 ** 64)
    with pytest.raises(ValueError):
        _single_config(n_ports=None)
    with pytest.raises(ValueError):
        _single_config(power_cap=0.0)
    with pytest.raises(ValueError):
        _single_config(sweep_kind="n_ports", sweep_values=(2.0, 2.5),
                       min_harvest=1e-4)
    with pytest.raises(ValueError):
        _single_config(alpha=0.0)
    with pytest.raises(ValueError):
        _single_config(alpha_grid_step=0.5)
    with pytest.raises(ValueError):
        _single_config(n_topologies=0)
    with pytest.raises(ValueError):
        ExperimentConfig(sweep_kind="min_harvest", sweep_values=(1e-4,),
                         schemes=("fixed-alpha",), n_realizations=1,
                         base_seed=0, n_ports=2, n_devices=2, power_cap=2.0,
                         alpha=1.0)


def test_sweeping_devices_implies_multi():
    cfg = ExperimentConfig(sweep_kind="n_devices", sweep_values=(2, 3),
                           schemes=("nearest",), n_realizations=1,
                           base_seed=1, n_ports=3, power_cap=2.0,
                           min_harvest=1e-4)
    assert cfg.is_multi
    with pytest.raises(ValueError):
        replace(cfg, schemes=("optimal",))


def test_run_shapes_and_aggregates():
    cfg = _single_config()
    result = run_experiment(cfg)
    assert len(result.rows) == 4
    assert result.numerical_failures == 0
    for row in result.rows:
        assert row.n_total == 3
        samples = result.raw[(row.scheme, row.sweep_value)]
        assert samples.shape == (3,)
        feas = np.isfinite(samples)
        assert row.n_feasible == int(feas.sum())
        if row.n_feasible:
            assert row.ee_mean_nats == pytest.approx(
                float(samples[feas].mean()), rel=1e-12)
            if row.n_feasible >= 2:
                assert row.ee_std == pytest.approx(
                    float(samples[feas].std(ddof=1)), rel=1e-12)
                assert row.ci95 == pytest.approx(
                    1.96 * row.ee_std / math.sqrt(row.n_feasible), rel=1e-12)


def test_runs_are_deterministic_and_thread_invariant():
    cfg = _single_config()
    serial_a = run_experiment(cfg, threads=1)
    serial_b = run_experiment(cfg, threads=1)
    threaded = run_experiment(cfg, threads=2)
    for key, samples in serial_a.raw.items():
        assert np.array_equal(samples, serial_b.raw[key], equal_nan=True)
        assert np.array_equal(samples, threaded.raw[key], equal_nan=True)


def test_optimal_dominates_every_benchmark_per_realization():
    cfg = _single_config(
        schemes=("optimal", "dinkelbach", "fixed-alpha", "se-max"),
        n_realizations=4, n_ports=4, sweep_values=(2e-4, 8e-4))
    result = run_experiment(cfg)
    for value in cfg.sweep_values:
        best = result.raw[("optimal", value)]
        for scheme in ("dinkelbach", "fixed-alpha", "se-max"):
            other = result.raw[(scheme, value)]
            mask = np.isfinite(other)
            # a feasible benchmark implies the exact solver is feasible too
            assert np.all(np.isfinite(best[mask]))
            assert np.all(best[mask] >= other[mask] * (1.0 - 1e-9))


def test_infeasible_realizations_are_counted_not_averaged():
    cfg = _single_config(schemes=("se-max",), n_ports=1,
                         sweep_values=(1e-3, 5e-3), n_realizations=12)
    result = run_experiment(cfg)
    top = result.raw[("se-max", 5e-3)]
    assert np.any(~np.isfinite(top))
    row = [r for r in result.rows if r.sweep_value == 5e-3][0]
    assert row.n_feasible == int(np.isfinite(top).sum())
    assert row.n_feasible < row.n_total
    if row.n_feasible:
        assert row.ee_mean_nats == pytest.approx(
            float(top[np.isfinite(top)].mean()), rel=1e-12)


def test_ci_shrinks_with_realizations():
    small = _single_config(schemes=("optimal",), sweep_values=(4e-4,),
                           n_realizations=40, n_ports=4)
    big = replace(small, n_realizations=160)
    ci_small = run_experiment(small).rows[0].ci95
    ci_big = run_experiment(big).rows[0].ci95
    assert ci_small > 0.0 and ci_big > 0.0
    ratio = ci_small / ci_big
    # quadrupling the sample ideally halves the interval; allow 2x slack
    assert 1.0 <= ratio <= 4.0


def test_results_do_not_depend_on_scheme_order():
    fwd = run_experiment(_single_config())
    rev = run_experiment(_single_config(schemes=("se-max", "optimal")))
    for key, samples in fwd.raw.items():
        assert np.array_equal(samples, rev.raw[key], equal_nan=True)


def test_nested_topology_mode_reuses_placements():
    params = replace(default_system_params(), fading="none")
    cfg = _single_config(schemes=("optimal",), sweep_values=(4e-4,),
                         n_realizations=4, n_topologies=2, params=params)
    samples = run_experiment(cfg).raw[("optimal", 4e-4)]
    # without fading, realizations repeat with period n_topologies
    assert samples[0] == samples[2]
    assert samples[1] == samples[3]
    assert samples[0] != samples[1]
    joint = _single_config(schemes=("optimal",), sweep_values=(4e-4,),
                           n_realizations=4, params=params)
    joint_samples = run_experiment(joint).raw[("optimal", 4e-4)]
    assert len(np.unique(joint_samples)) == 4


def test_multi_device_sweep_runs():
    cfg = ExperimentConfig(sweep_kind="n_devices", sweep_values=(2, 3),
                           schemes=("proposed", "fixed-alpha", "nearest"),
                           n_realizations=2, base_seed=5, n_ports=3,
                           power_cap=2.0, min_harvest=2e-4)
    result = run_experiment(cfg)
    assert len(result.rows) == 6
    for value in cfg.sweep_values:
        joint = result.raw[("proposed", value)]
        near = result.raw[("nearest", value)]
        mask = np.isfinite(joint) & np.isfinite(near)
        assert np.all(joint[mask] >= near[mask] * (1.0 - 1e-9))


def test_emitted_csv_format(tmp_path):
    result = run_experiment(_single_config())
    csv_path, sidecar_path = emit_results(result, tmp_path / "out")
    lines = open(csv_path).read().splitlines()
    assert lines[0] == EXPECTED_HEADER
    assert len(lines) == 1 + 4
    for line in lines[1:]:
        fields = line.split(",")
        assert len(fields) == 9
        assert fields[1] == "min_harvest"
        nats, bits = float(fields[3]), float(fields[4])
        assert bits == pytest.approx(nats * LOG2E, rel=1e-8)
        assert int(fields[8]) == 3
    sidecar = json.loads(open(sidecar_path).read())
    assert "_notes" in sidecar
    assert sidecar["sweep_kind"] == "min_harvest"
    assert sidecar["schemes"] == ["optimal", "se-max"]


def test_sidecar_round_trip_reproduces_csv(tmp_path):
    cfg = _single_config()
    first = emit_results(run_experiment(cfg), tmp_path / "a")
    loaded = load_config(first[1])
    assert loaded == cfg
    second = emit_results(run_experiment(loaded), tmp_path / "b")
    third = emit_results(run_experiment(loaded, threads=2), tmp_path / "c")
    blob = open(first[0], "rb").read()
    assert blob == open(second[0], "rb").read()
    assert blob == open(third[0], "rb").read()


def test_load_config_overrides(tmp_path):
    cfg = _single_config()
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config_to_dict(cfg)))
    loaded = load_config(path, base_seed=123, n_realizations=9)
    assert loaded.base_seed == 123
    assert loaded.n_realizations == 9
    assert loaded.sweep_values == cfg.sweep_values


def test_config_dict_round_trip_rejects_garbage():
    d = config_to_dict(_single_config())
    assert config_from_dict(d) == _single_config()
    with pytest.raises(ValueError):
        config_from_dict({**d, "frequency": 2.4e9})
    missing = {k: v for k, v in d.items() if k != "sweep_kind"}
    with pytest.raises(ValueError):
        config_from_dict(missing)


def test_parse_params_accepts_dbm():
    p = parse_params({"noise_power": {"value": -104.0, "unit": "dBm"}})
    assert p.noise_power == pytest.approx(dbm_to_watts(-104.0), rel=1e-15)
    assert p.circuit_power == default_system_params().circuit_power
    plain = parse_params({"noise_power": 1e-13})
    assert plain.noise_power == 1e-13
    with pytest.raises(ValueError):
        parse_params({"bandwidth": 1.0})
    with pytest.raises(ValueError):
        parse_params({"noise_power": {"value": -104.0, "unit": "dBW"}})
    with pytest.raises(ValueError):
        parse_params({"noise_power": {"value": -104.0, "level": 1}})
