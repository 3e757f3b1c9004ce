"""Benchmark schemes for the single-device problem.

Three reference allocations to compare the closed-form optimum against:

* ``solve_se_max`` -- rate-maximizing full power with the splitting ratio
  chosen to just meet the harvest target.
* ``solve_fixed_alpha`` -- EE-optimal powers at a caller-fixed splitting
  ratio, via a Dinkelbach loop whose inner concave program is solved by
  coordinate ascent nested inside a bisection on the harvest multiplier.
* ``solve_dinkelbach_single`` -- the fixed-ratio solver swept over a uniform
  grid of splitting ratios, keeping the best.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .model import SingleSolution, SolverStats
from .single_optimal import optimal_alpha

__all__ = [
    "DinkelbachState",
    "solve_se_max",
    "solve_fixed_alpha",
    "solve_dinkelbach_single",
    "bcd_inner_solve",
    "bcd_inner_lagrangian",
    "dinkelbach_trace",
]


@dataclass(frozen=True)
class DinkelbachState:
    """One outer iteration of a Dinkelbach loop: ratio guess and residual."""

    q: float
    t_residual: float
    iteration: int


@njit(cache=True, nogil=True)
def _bcd_sweeps(p, h, caps, sigma2, alpha, q, mu, zeta, tol, max_sweeps):
    """Coordinate-ascent sweeps on the inner Lagrangian at fixed (alpha, q, mu).

    Each pass updates every port to its exact 1-D maximizer given the others;
    stops when the largest power change in a sweep falls below `tol` [W].
    Returns the number of sweeps run. `p` is updated in place.
    """
    n = h.size
    s = 0.0
    for j in range(n):
        s += h[j] * p[j]
    sweeps = 0
    for _ in range(max_sweeps):
        sweeps += 1
        max_change = 0.0
        for i in range(n):
            coeff = mu * zeta * (1.0 - alpha) * h[i] - q
            if coeff >= 0.0:
                pn = caps[i]
            else:
                s_others = s - h[i] * p[i]
                x = 1.0 / (-coeff) - sigma2 / (alpha * h[i]) - s_others / h[i]
                if x < 0.0:
                    x = 0.0
                elif x > caps[i]:
                    x = caps[i]
                pn = x
            d = pn - p[i]
            if d != 0.0:
                s += h[i] * d
                if abs(d) > max_change:
                    max_change = abs(d)
                p[i] = pn
        if max_change < tol:
            break
    return sweeps


@njit(cache=True, nogil=True)
def _inner_fixed_alpha(h, caps, sigma2, zeta, e_min, alpha, q, p):
    """Maximize rate - q * power over the box subject to the harvest floor.

    The harvest multiplier is found by bisection; every evaluation runs the
    coordinate sweeps to their fixed point. Returns (mu, total_sweeps); the
    final powers (at the upper bisection endpoint, so the floor is met) are
    left in `p`.
    """
    sweeps = _bcd_sweeps(p, h, caps, sigma2, alpha, q, 0.0, zeta, 1e-8, 500)
    factor = zeta * (1.0 - alpha)
    harv = 0.0
    for j in range(h.size):
        harv += h[j] * p[j]
    harv *= factor
    if harv >= e_min:
        return 0.0, sweeps
    hi = 1.0
    for _ in range(60):
        sweeps += _bcd_sweeps(p, h, caps, sigma2, alpha, q, hi, zeta, 1e-8, 500)
        harv = 0.0
        for j in range(h.size):
            harv += h[j] * p[j]
        harv *= factor
        if harv >= e_min:
            break
        hi *= 2.0
    lo = 0.0
    for _ in range(100):
        if hi - lo <= 1e-13 * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        sweeps += _bcd_sweeps(p, h, caps, sigma2, alpha, q, mid, zeta, 1e-8, 500)
        harv = 0.0
        for j in range(h.size):
            harv += h[j] * p[j]
        harv *= factor
        if harv >= e_min:
            hi = mid
        else:
            lo = mid
    sweeps += _bcd_sweeps(p, h, caps, sigma2, alpha, q, hi, zeta, 1e-8, 500)
    return hi, sweeps


@njit(cache=True, nogil=True)
def _dinkelbach_fixed_alpha(h, caps, sigma2, pc, zeta, e_min, alpha, max_outer, tol):
    """Dinkelbach ratio iteration at a fixed splitting ratio.

    Returns (p, q, outer_iterations, total_sweeps, residual, converged).
    """
    p = np.zeros(h.size)
    q = 0.0
    total_sweeps = 0
    resid = np.inf
    converged = False
    outer = 0
    for outer in range(1, max_outer + 1):
        _, sw = _inner_fixed_alpha(h, caps, sigma2, zeta, e_min, alpha, q, p)
        total_sweeps += sw
        s = 0.0
        ptot = pc
        for j in range(h.size):
            s += h[j] * p[j]
            ptot += p[j]
        rate = math.log1p(alpha * s / sigma2)
        resid = abs(rate - q * ptot)
        if resid < tol * max(1.0, q):
            converged = True
            break
        q = rate / ptot
    return p, q, outer, total_sweeps, resid, converged


def _infeasible_solution(n_ports):
    return SingleSolution(
        powers=np.zeros(n_ports),
        ps_ratio=0.0,
        rate=0.0,
        harvested=0.0,
        ee=0.0,
        feasible=False,
        stats=SolverStats(converged=True),
    )


def solve_se_max(scenario):
    """Rate-maximizing benchmark: every port at its cap, ratio meets the floor."""
    params = scenario.params
    zeta = params.conversion_efficiency
    caps = np.array(scenario.power_caps)
    received = float(scenario.gains @ caps)
    if scenario.min_harvest / zeta > received:
        return _infeasible_solution(scenario.n_ports)
    alpha = optimal_alpha(caps, scenario)
    rate = math.log1p(alpha * received / params.noise_power)
    harvested = zeta * (1.0 - alpha) * received
    ee = rate / (float(caps.sum()) + params.circuit_power)
    return SingleSolution(
        powers=caps,
        ps_ratio=alpha,
        rate=rate,
        harvested=harvested,
        ee=ee,
        feasible=True,
        stats=SolverStats(converged=True),
    )


def solve_fixed_alpha(scenario, alpha):
    """EE-optimal powers at a fixed splitting ratio alpha in (0, 1].

    Infeasible whenever even full power cannot meet the harvest floor at this
    ratio (in particular alpha = 1 with a positive floor).
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    params = scenario.params
    zeta = params.conversion_efficiency
    h = np.ascontiguousarray(scenario.gains)
    caps = np.ascontiguousarray(scenario.power_caps)
    if zeta * (1.0 - alpha) * float(h @ caps) < scenario.min_harvest:
        return _infeasible_solution(scenario.n_ports)
    p, q, outer, sweeps, resid, converged = _dinkelbach_fixed_alpha(
        h, caps, params.noise_power, params.circuit_power, zeta,
        scenario.min_harvest, float(alpha), 50, 1e-6,
    )
    s = float(h @ p)
    rate = math.log1p(alpha * s / params.noise_power)
    harvested = zeta * (1.0 - alpha) * s
    ee = rate / (float(p.sum()) + params.circuit_power)
    return SingleSolution(
        powers=p,
        ps_ratio=float(alpha),
        rate=rate,
        harvested=harvested,
        ee=ee,
        feasible=True,
        stats=SolverStats(
            outer_iterations=outer,
            inner_iterations=sweeps,
            converged=converged,
            final_residual=resid,
        ),
    )


def solve_dinkelbach_single(scenario, alpha_grid_step=0.01):
    """Fixed-ratio Dinkelbach solver swept over the ratio grid {step, ..., 1}.

    Keeps the grid point with the best EE (ties break toward the smaller
    ratio). Infeasible when no grid ratio can meet the harvest floor.
    """
    if not 0.0 < alpha_grid_step <= 0.1:
        raise ValueError("alpha_grid_step must lie in (0, 0.1]")
    params = scenario.params
    zeta = params.conversion_efficiency
    h = np.ascontiguousarray(scenario.gains)
    caps = np.ascontiguousarray(scenario.power_caps)
    full_received = float(h @ caps)
    m = int(math.floor(1.0 / alpha_grid_step + 1e-9))
    grid = np.minimum(alpha_grid_step * np.arange(1, m + 1), 1.0)
    best = None
    total_sweeps = 0
    for alpha in grid:
        if zeta * (1.0 - alpha) * full_received < scenario.min_harvest:
            continue
        p, q, outer, sweeps, resid, converged = _dinkelbach_fixed_alpha(
            h, caps, params.noise_power, params.circuit_power, zeta,
            scenario.min_harvest, float(alpha), 50, 1e-6,
        )
        total_sweeps += sweeps
        s = float(h @ p)
        rate = math.log1p(alpha * s / params.noise_power)
        ee = rate / (float(p.sum()) + params.circuit_power)
        if best is None or ee > best[0]:
            best = (ee, float(alpha), p, rate, zeta * (1.0 - alpha) * s,
                    outer, resid, converged)
    if best is None:
        return _infeasible_solution(scenario.n_ports)
    ee, alpha, p, rate, harvested, outer, resid, converged = best
    return SingleSolution(
        powers=p,
        ps_ratio=alpha,
        rate=rate,
        harvested=harvested,
        ee=ee,
        feasible=True,
        stats=SolverStats(
            outer_iterations=outer,
            inner_iterations=total_sweeps,
            converged=converged,
            final_residual=resid,
        ),
    )


def bcd_inner_lagrangian(powers, alpha, q, mu, scenario):
    """Inner Lagrangian value rate - q*(power + p_c) + mu*(harvest - floor)."""
    params = scenario.params
    p = np.asarray(powers, dtype=float)
    s = float(scenario.gains @ p)
    rate = math.log1p(alpha * s / params.noise_power)
    harvest = params.conversion_efficiency * (1.0 - alpha) * s
    return (
        rate
        - q * (float(p.sum()) + params.circuit_power)
        + mu * (harvest - scenario.min_harvest)
    )


def bcd_inner_solve(scenario, alpha, q, mu, max_sweeps=500):
    """Run the inner coordinate sweeps and record the Lagrangian per sweep.

    Diagnostic variant of the solver's inner loop: returns (powers, values)
    where values[j] is the Lagrangian after sweep j. The sequence is
    non-decreasing because every coordinate step is an exact 1-D maximizer.
    """
    params = scenario.params
    h = np.ascontiguousarray(scenario.gains)
    caps = np.ascontiguousarray(scenario.power_caps)
    p = np.zeros(h.size)
    values = []
    for _ in range(max_sweeps):
        before = p.copy()
        _bcd_sweeps(
            p, h, caps, params.noise_power, float(alpha), float(q), float(mu),
            params.conversion_efficiency, 0.0, 1,
        )
        values.append(bcd_inner_lagrangian(p, alpha, q, mu, scenario))
        if float(np.max(np.abs(p - before))) < 1e-8:
            break
    return p, np.asarray(values)


def dinkelbach_trace(scenario, alpha, max_outer=50):
    """Outer Dinkelbach iterations at a fixed ratio, one state per q update."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    params = scenario.params
    zeta = params.conversion_efficiency
    h = np.ascontiguousarray(scenario.gains)
    caps = np.ascontiguousarray(scenario.power_caps)
    if zeta * (1.0 - alpha) * float(h @ caps) < scenario.min_harvest:
        raise ValueError("harvest floor unreachable at this alpha")
    p = np.zeros(h.size)
    q = 0.0
    trace = []
    for it in range(1, max_outer + 1):
        _inner_fixed_alpha(
            h, caps, params.noise_power, zeta, scenario.min_harvest,
            float(alpha), q, p,
        )
        s = float(h @ p)
        rate = math.log1p(alpha * s / params.noise_power)
        ptot = float(p.sum()) + params.circuit_power
        resid = abs(rate - q * ptot)
        trace.append(DinkelbachState(q=q, t_residual=resid, iteration=it))
        if resid < 1e-6 * max(1.0, q):
            break
        q = rate / ptot
    return trace
