"""Acceptance gate: the ten release checks, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` verdict line with the
measured numbers (run with ``-s`` to see them live) and then asserts.
The sweep-based checks reuse module-scoped experiment runs; realizations
are paired across sweep points (same topology seeds), so ordering and
monotonicity clauses compare like with like.
"""

import time

import numpy as np
import pytest

from oracles import brute_force_single, grid_oracle_multi
from swiptdas.harness import (
    ExperimentConfig,
    emit_results,
    load_config,
    run_experiment,
)
from swiptdas.model import (
    default_system_params,
    generate_scenario_multi,
    generate_scenario_single,
)
from swiptdas.multi_solver import (
    DualVector,
    dual_value_and_subgradient,
    solve_multi,
)
from swiptdas.scalar_opt import lambert_w0
from swiptdas.single_optimal import (
    CertificateError,
    kkt_certificate,
    solve_single_optimal,
)

PARAMS = default_system_params()
HARVEST_LEVELS = (0.0, 2e-4, 8e-4, 1.4e-3, 3e-3)
EMIN_SWEEP = (2e-4, 4e-4, 6e-4, 8e-4, 1e-3, 1.2e-3, 1.4e-3)


def _verdict(num, name, ok, detail):
    line = "[%s] acceptance %02d %s: %s" % ("PASS" if ok else "FAIL",
                                            num, name, detail)
    print(line)
    assert ok, line


def _curve(result, scheme):
    pts = sorted((row.sweep_value, row.ee_mean_nats)
                 for row in result.rows if row.scheme == scheme)
    return np.array([v for _, v in pts])


def _non_increasing(curve):
    return bool(np.all(np.diff(curve) <= 1e-12 * np.abs(curve[:-1])))


def _strictly_decreasing(curve):
    return bool(np.all(np.diff(curve) < 0.0))


# ---------------------------------------------------------------------------
# shared experiment runs (one per sweep-based check)


def _timed_run(config):
    start = time.perf_counter()
    result = run_experiment(config)
    return result, time.perf_counter() - start


@pytest.fixture(scope="module")
def harvest_sweep_single():
    cfg = ExperimentConfig(
        sweep_kind="min_harvest", sweep_values=EMIN_SWEEP,
        schemes=("optimal", "dinkelbach", "fixed-alpha", "se-max"),
        n_realizations=200, base_seed=301, n_ports=20, power_cap=2.0)
    return _timed_run(cfg)


@pytest.fixture(scope="module")
def budget_sweep_single():
    cfg = ExperimentConfig(
        sweep_kind="power_cap",
        sweep_values=tuple(0.5 * i for i in range(1, 13)),
        schemes=("optimal", "dinkelbach", "fixed-alpha", "se-max"),
        n_realizations=200, base_seed=401, n_ports=20, min_harvest=1e-3)
    return _timed_run(cfg)


@pytest.fixture(scope="module")
def ports_sweep_single():
    cfg = ExperimentConfig(
        sweep_kind="n_ports", sweep_values=tuple(range(5, 41, 5)),
        schemes=("optimal", "se-max"),
        n_realizations=200, base_seed=501, power_cap=2.0, min_harvest=8e-4)
    return _timed_run(cfg)


@pytest.fixture(scope="module")
def harvest_sweep_multi():
    cfg = ExperimentConfig(
        sweep_kind="min_harvest", sweep_values=EMIN_SWEEP,
        schemes=("proposed", "nearest", "fixed-alpha"),
        n_realizations=200, base_seed=601, n_ports=20, n_devices=4,
        power_cap=6.0)
    return _timed_run(cfg)


@pytest.fixture(scope="module")
def devices_sweep_multi():
    cfg = ExperimentConfig(
        sweep_kind="n_devices", sweep_values=tuple(range(2, 9)),
        schemes=("proposed", "nearest", "fixed-alpha"),
        n_realizations=200, base_seed=701, n_ports=20, power_cap=6.0,
        min_harvest=8e-4)
    return _timed_run(cfg)


# ---------------------------------------------------------------------------
# 1. single-device solver vs. exhaustive grid


def test_acceptance_01_single_solver_matches_brute_force():
    start = time.perf_counter()
    worst = 0.0
    feasible = 0
    for seed in range(200):
        n = 1 + seed % 4
        e_min = HARVEST_LEVELS[(seed // 4) % 4]
        sc = generate_scenario_single(n, seed, PARAMS, cap=2.0,
                                      min_harvest=e_min)
        sol = solve_single_optimal(sc)
        ref = brute_force_single(sc)
        if ref > 0.0:
            feasible += 1
            worst = max(worst, (ref - sol.ee) / ref)
        else:
            worst = max(worst, ref - sol.ee)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-3 and elapsed <= 120.0
    _verdict(1, "single solver vs brute force", ok,
             "worst relative deficit %.2e over 200 instances "
             "(%d feasible), %.1fs (budget 120s)" % (worst, feasible, elapsed))


# ---------------------------------------------------------------------------
# 2. Lambert-W kernel accuracy


def test_acceptance_02_lambert_kernel():
    rng = np.random.default_rng(20)
    branch = -1.0 / np.e
    x = np.concatenate([
        np.array([branch, 0.0, 1.0, np.e, 1e6]),
        branch + 10.0 ** rng.uniform(-18.0, 0.0, 20_000),
        rng.uniform(branch, 1e6, 39_995),
        10.0 ** rng.uniform(-8.0, 6.0, 40_000),
    ])
    assert x.size == 100_000
    lambert_w0(np.array([1.0]))  # warm any lazy compilation before timing
    start = time.perf_counter()
    w = lambert_w0(x)
    elapsed = time.perf_counter() - start
    resid = np.abs(w * np.exp(w) - x) / np.maximum(1.0, np.abs(x))
    ok = float(resid.max()) <= 1e-12 and elapsed <= 1.0
    _verdict(2, "lambert-w fixed point", ok,
             "max residual %.2e over 1e5 samples in [-1/e, 1e6], "
             "%.3fs (budget 1s)" % (resid.max(), elapsed))


# ---------------------------------------------------------------------------
# 3. KKT certificate on solver outputs


def test_acceptance_03_kkt_certificate():
    feasible = 0
    certified = 0
    for seed in range(500):
        n = 1 + seed % 4
        e_min = HARVEST_LEVELS[(seed // 4) % 5]
        sc = generate_scenario_single(n, seed, PARAMS, cap=2.0,
                                      min_harvest=e_min)
        sol = solve_single_optimal(sc)
        if not sol.feasible:
            continue
        feasible += 1
        try:
            kkt_certificate(sol, sc)
            certified += 1
        except CertificateError:
            pass
    ok = feasible >= 300 and certified == feasible
    _verdict(3, "kkt certificate", ok,
             "certified %d/%d feasible outputs of 500 instances"
             % (certified, feasible))


# ---------------------------------------------------------------------------
# 4. harvest-requirement sweep: scheme ordering and loss magnitudes


def test_acceptance_04_harvest_sweep_ordering(harvest_sweep_single):
    result, elapsed = harvest_sweep_single
    opt = _curve(result, "optimal")
    dink = _curve(result, "dinkelbach")
    fixed = _curve(result, "fixed-alpha")
    semax = _curve(result, "se-max")
    slack = 1e-9
    ordering = bool(np.all(opt >= dink * (1 - slack))
                    and np.all(dink >= fixed * (1 - slack))
                    and np.all(opt >= semax * (1 - slack)))
    monotone = all(_non_increasing(c) for c in (opt, dink, fixed, semax))
    semax_loss = float(np.mean((opt - semax) / opt))
    fixed_loss = float(np.mean((opt - fixed) / opt))
    ok = (ordering and monotone and semax_loss >= 0.80
          and 0.50 <= fixed_loss <= 0.90 and elapsed <= 600.0)
    _verdict(4, "harvest sweep ordering", ok,
             "ordering %s, monotone %s, se-max mean loss %.1f%% (need >=80%%),"
             " fixed-alpha mean loss %.1f%% (band [50%%, 90%%]), %.1fs"
             % (ordering, monotone, 100 * semax_loss, 100 * fixed_loss,
                elapsed))


# ---------------------------------------------------------------------------
# 5. power-budget sweep: saturation and SE-max decline


def test_acceptance_05_budget_sweep_saturation(budget_sweep_single):
    result, elapsed = budget_sweep_single
    changes = {}
    saturated = True
    for scheme in ("optimal", "dinkelbach", "fixed-alpha"):
        c = _curve(result, scheme)
        change = abs(c[-1] - c[-2]) / c[-2]
        changes[scheme] = change
        saturated = saturated and change < 0.02
    semax = _curve(result, "se-max")
    declining = _strictly_decreasing(semax[len(semax) // 2:])
    ok = saturated and declining
    _verdict(5, "budget sweep saturation", ok,
             "last-step changes " +
             ", ".join("%s %.3f%%" % (s, 100 * v) for s, v in changes.items())
             + " (need <2%%), se-max strictly decreasing on upper half %s, "
               "%.1fs" % (declining, elapsed))


# ---------------------------------------------------------------------------
# 6. port-count sweep: growth for optimal, interior peak for SE-max


def test_acceptance_06_port_sweep_shape(ports_sweep_single):
    result, elapsed = ports_sweep_single
    opt = _curve(result, "optimal")
    semax = _curve(result, "se-max")
    increasing = bool(np.all(np.diff(opt) > 0.0))
    peak = int(np.argmax(semax))
    interior = 0 < peak < semax.size - 1
    ports = tuple(range(5, 41, 5))
    ok = increasing and interior
    _verdict(6, "port sweep shape", ok,
             "optimal strictly increasing %s, se-max peak at N=%d "
             "(interior needed: %s), %.1fs"
             % (increasing, ports[peak], interior, elapsed))


# ---------------------------------------------------------------------------
# 7. multi-device solver health and tiny-instance oracle


def test_acceptance_07_multi_solver_health():
    healthy = 0
    checked = 0
    for seed in range(100):
        n = 2 + seed % 9
        k = 1 + seed % 4
        e_min = (2e-4, 5e-4, 8e-4)[seed % 3]
        cap = (2.0, 6.0)[seed % 2]
        sc = generate_scenario_multi(n, k, seed, PARAMS, cap, e_min)
        sol = solve_multi(sc)
        if not sol.feasible:
            continue
        checked += 1
        rowsum = sol.powers.sum(axis=1)
        fine = (sol.stats.converged
                and sol.stats.final_residual <= 1e-6 * max(1.0, sol.ee)
                and np.all(rowsum <= sc.power_caps * (1 + 1e-9) + 1e-12)
                and np.all(sol.powers >= -1e-12)
                and np.all(sol.harvested >= sc.min_harvest * (1 - 1e-9)
                           - 1e-12)
                and np.all(sol.ps_ratios >= -1e-12)
                and np.all(sol.ps_ratios <= 1 + 1e-12))
        healthy += bool(fine)

    # block sweeps of the inner Lagrangian solver never decrease its value
    from swiptdas.multi_solver import _bcd_multi

    rng = np.random.default_rng(7)
    sweeps_ok = True
    for seed in range(10):
        n = 2 + seed % 9
        k = 1 + seed % 4
        sc = generate_scenario_multi(n, k, seed, PARAMS, 2.0, 3e-4)
        h = np.ascontiguousarray(sc.gains)
        caps = np.ascontiguousarray(sc.power_caps)
        alphas = rng.uniform(0.3, 0.9, k)
        duals = DualVector(upsilon=rng.uniform(0.0, 0.5, n),
                           mu=rng.uniform(0.0, 2e3, k))
        q = rng.uniform(0.0, 10.0)
        dvals = -q - duals.upsilon + h @ (
            duals.mu * PARAMS.conversion_efficiency * (1.0 - alphas))
        p = np.zeros((n, k))
        s = np.zeros(k)
        best = np.zeros(k, dtype=np.int64)
        prev = dual_value_and_subgradient(p, alphas, duals, q, sc)[0]
        for _ in range(8):
            _bcd_multi(p, s, h, caps, alphas, dvals, float(k),
                       PARAMS.noise_power, False, best, 0.0, 1)
            val = dual_value_and_subgradient(p, alphas, duals, q, sc)[0]
            sweeps_ok = sweeps_ok and val >= prev - 1e-9 * max(1.0, abs(prev))
            prev = val

    start = time.perf_counter()
    oracle_gap = 0.0
    for seed in range(3):
        sc = generate_scenario_multi(2, 2, seed, PARAMS, 2.0, 3e-4)
        sol = solve_multi(sc)
        ref = grid_oracle_multi(sc, divisions=50)
        if ref > 0.0:
            oracle_gap = max(oracle_gap, (ref - sol.ee) / ref)
    oracle_elapsed = time.perf_counter() - start

    ok = (checked >= 60 and healthy == checked and sweeps_ok
          and oracle_gap <= 0.02 and oracle_elapsed <= 900.0)
    _verdict(7, "multi solver health", ok,
             "healthy %d/%d feasible of 100 instances, sweeps monotone %s, "
             "worst oracle deficit %.2f%% (need <=2%%), oracle subset %.1fs "
             "(budget 900s)"
             % (healthy, checked, sweeps_ok, 100 * oracle_gap,
                oracle_elapsed))


# ---------------------------------------------------------------------------
# 8. multi-device harvest sweep: association gap narrows, fixed-ratio crossover


def test_acceptance_08_multi_harvest_crossover(harvest_sweep_multi):
    result, elapsed = harvest_sweep_multi
    prop = _curve(result, "proposed")
    near = _curve(result, "nearest")
    fixed = _curve(result, "fixed-alpha")
    gap = prop - near
    narrows = bool(gap[-1] < gap[0])
    above_at_low = bool(fixed[0] > near[0])
    below_at_high = bool(fixed[-1] < near[-1])
    ok = narrows and above_at_low and below_at_high
    _verdict(8, "multi harvest crossover", ok,
             "proposed-nearest gap %.4f -> %.4f (must narrow), "
             "fixed-alpha minus nearest %+.4f at lowest / %+.4f at highest "
             "requirement (must cross), %.1fs"
             % (gap[0], gap[-1], fixed[0] - near[0], fixed[-1] - near[-1],
                elapsed))


# ---------------------------------------------------------------------------
# 9. device-count sweep: every scheme declines with K


def test_acceptance_09_device_sweep_decline(devices_sweep_multi):
    result, elapsed = devices_sweep_multi
    decline = {s: _strictly_decreasing(_curve(result, s))
               for s in ("proposed", "nearest", "fixed-alpha")}
    ok = all(decline.values())
    _verdict(9, "device sweep decline", ok,
             ", ".join("%s strictly decreasing %s" % kv
                       for kv in decline.items()) + ", %.1fs" % elapsed)


# ---------------------------------------------------------------------------
# 10. byte-for-byte reproducibility from the emitted sidecar


def test_acceptance_10_sidecar_reproducibility(tmp_path):
    cfg = ExperimentConfig(
        sweep_kind="min_harvest", sweep_values=(2e-4, 8e-4),
        schemes=("optimal", "dinkelbach", "se-max"),
        n_realizations=5, base_seed=88, n_ports=4, power_cap=2.0)
    first = tmp_path / "first"
    emit_results(run_experiment(cfg), first)
    reference = (first / "results.csv").read_bytes()

    reloaded = load_config(first / "config.json")
    serial = tmp_path / "serial"
    emit_results(run_experiment(reloaded), serial)
    threaded = tmp_path / "threaded"
    emit_results(run_experiment(reloaded, threads=2), threaded)

    serial_ok = (serial / "results.csv").read_bytes() == reference
    threaded_ok = (threaded / "results.csv").read_bytes() == reference
    ok = serial_ok and threaded_ok
    _verdict(10, "sidecar reproducibility", ok,
             "serial rerun identical %s, threaded rerun identical %s "
             "(%d CSV bytes)" % (serial_ok, threaded_ok, len(reference)))
