"""Exact closed-form solver for single-device EE maximization.

Maximizes ln(1 + alpha * sum h_i p_i / sigma^2) / (sum p_i + p_c) subject to
per-port power caps and a harvested-power floor, jointly over the transmit
powers and the power-splitting ratio. The optimum saturates ports in
descending gain order down to one partially loaded port (all later ports
silent); each partial-port subproblem is a log-over-affine fraction solved in
closed form through the Lambert W function, and the splitting ratio then
makes the harvest constraint tight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ScenarioSingle, SingleSolution, SolverStats
from .scalar_opt import LogFractionProblem, maximize_log_fraction

__all__ = [
    "PortCoefficients",
    "port_coefficients",
    "p_min_threshold",
    "optimal_alpha",
    "solve_single_optimal",
    "KktCertificate",
    "CertificateError",
    "kkt_certificate",
]

# relative tolerance for deciding that a port came out exactly at its cap
_CAP_TOL = 1e-12


def _require_descending(gains):
    if np.any(np.diff(gains) > 0.0):
        raise ValueError("gains must be sorted in descending order")


@dataclass(frozen=True)
class PortCoefficients:
    """Reduced 1-D problem for one port, given all better ports at their caps.

    With the splitting ratio eliminated (harvest constraint tight), the EE as
    a function of this port's power p is ln(a p + b) / (p + c), valid for
    p >= min_power (the smallest power that leaves the harvest target
    reachable with a non-negative splitting ratio).
    """

    a: float  # h_i / sigma^2
    b: float  # 1 + (prefix received power - E-bar/zeta) / sigma^2
    c: float  # p_c + prefix transmit power
    min_power: float


def p_min_threshold(index, scenario):
    """Smallest feasible power of the port at `index` in descending-gain order.

    The scenario's gains must already be sorted descending. Ports before
    `index` are assumed saturated at their caps.
    """
    h = scenario.gains
    _require_descending(h)
    if not 0 <= index < h.size:
        raise ValueError("index out of range")
    caps = scenario.power_caps
    zeta = scenario.params.conversion_efficiency
    deficit = scenario.min_harvest / zeta - float(h[:index] @ caps[:index])
    return max(0.0, deficit / h[index])


def port_coefficients(index, scenario):
    """Coefficients of the reduced per-port problem (gains sorted descending)."""
    h = scenario.gains
    _require_descending(h)
    if not 0 <= index < h.size:
        raise ValueError("index out of range")
    caps = scenario.power_caps
    params = scenario.params
    # compute the harvest deficit once so b and min_power cancel exactly
    deficit = scenario.min_harvest / params.conversion_efficiency - float(
        h[:index] @ caps[:index]
    )
    return PortCoefficients(
        a=h[index] / params.noise_power,
        b=1.0 - deficit / params.noise_power,
        c=params.circuit_power + float(np.sum(caps[:index])),
        min_power=max(0.0, deficit / h[index]),
    )


def optimal_alpha(powers, scenario):
    """Splitting ratio that makes the harvest constraint tight: [1 - E/(zeta S)]+.

    Returns 1 when no harvest is required. With zero received power and a
    positive requirement the ratio degenerates to 0; the caller is expected
    to have flagged such instances infeasible.
    """
    if scenario.min_harvest == 0.0:
        return 1.0
    received = float(scenario.gains @ np.asarray(powers, dtype=float))
    if received <= 0.0:
        return 0.0
    zeta = scenario.params.conversion_efficiency
    return max(0.0, 1.0 - scenario.min_harvest / (zeta * received))


def solve_single_optimal(scenario):
    """Exact EE maximizer for a single-device instance.

    Walks ports in descending gain order: each port's power solves the
    reduced log-over-affine problem in closed form; the walk continues while
    ports come out at their caps and stops at the first interior power
    (every later port transmits nothing). Infeasible when even full power
    everywhere cannot meet the harvest target.
    """
    h = scenario.gains
    caps = scenario.power_caps
    params = scenario.params
    n = h.size
    order = np.argsort(-h, kind="stable")
    hs = h[order]
    cs = caps[order]
    zeta = params.conversion_efficiency
    needed = scenario.min_harvest / zeta
    if needed > float(hs @ cs):
        return SingleSolution(
            powers=np.zeros(n),
            ps_ratio=0.0,
            rate=0.0,
            harvested=0.0,
            ee=0.0,
            feasible=False,
            stats=SolverStats(converged=True),
        )
    sorted_scenario = ScenarioSingle(hs, cs, scenario.min_harvest, params)
    p = np.zeros(n)
    examined = 0
    for i in range(n):
        examined += 1
        coeff = port_coefficients(i, sorted_scenario)
        if coeff.min_power > cs[i]:
            # this port alone cannot close the harvest deficit: saturate it
            p[i] = cs[i]
            continue
        problem = LogFractionProblem(
            a=coeff.a, b=coeff.b, c=coeff.c, x_min=coeff.min_power, x_max=cs[i]
        )
        x = maximize_log_fraction(problem)
        if x >= cs[i] * (1.0 - _CAP_TOL):
            p[i] = cs[i]
            continue
        p[i] = x
        break
    alpha = optimal_alpha(p, sorted_scenario)
    received = float(hs @ p)
    rate = math.log1p(alpha * received / params.noise_power)
    harvested = zeta * (1.0 - alpha) * received
    ee = rate / (float(p.sum()) + params.circuit_power)
    powers = np.empty(n)
    powers[order] = p
    return SingleSolution(
        powers=powers,
        ps_ratio=alpha,
        rate=rate,
        harvested=harvested,
        ee=ee,
        feasible=True,
        stats=SolverStats(outer_iterations=examined, converged=True),
    )


class CertificateError(ValueError):
    """Raised when a solution fails the stationarity/complementarity checks."""


@dataclass(frozen=True)
class KktCertificate:
    """Optimality certificate for a feasible single-device solution.

    Gradients and multipliers are reported in descending-gain order (see
    `order`). The per-port objective gradient must be strictly descending,
    positive gradients must sit at capped ports, negative ones at silent
    ports, and the one partial port must be stationary.
    """

    order: np.ndarray  # permutation mapping sorted positions to original ports
    power_gradients: np.ndarray  # d(EE)/dp_i at the solution, sorted order
    alpha_factor: float  # common factor of the splitting-ratio stationarity
    harvest_multiplier: float  # multiplier of the harvested-power floor
    lower_multipliers: np.ndarray  # multipliers of p_i >= 0
    upper_multipliers: np.ndarray  # multipliers of p_i <= cap
    partial_index: int  # sorted position of the first non-capped port (n if none)


def kkt_certificate(solution, scenario, gradient_tol=1e-6):
    """Check first-order optimality of a feasible solution and certify it.

    Recovers the harvest multiplier from the splitting-ratio stationarity,
    evaluates the per-port gradients, and verifies the saturated-prefix
    structure, the gradient sign pattern, complementary slackness, and (for a
    positive requirement) harvest tightness. Returns a KktCertificate or
    raises CertificateError naming every violated condition.

    `gradient_tol` is relative to the gradient scale of the instance.
    """
    if not solution.feasible:
        raise ValueError("certificate requires a feasible solution")
    params = scenario.params
    h = scenario.gains
    n = h.size
    order = np.argsort(-h, kind="stable")
    hs = h[order]
    cs = scenario.power_caps[order]
    ps = np.asarray(solution.powers, dtype=float)[order]
    alpha = solution.ps_ratio
    sigma2 = params.noise_power
    zeta = params.conversion_efficiency
    received = float(hs @ ps)
    total_power = float(ps.sum()) + params.circuit_power
    rate = math.log1p(alpha * received / sigma2)
    t_factor = 1.0 / (total_power * (sigma2 + alpha * received))
    mu = 0.0 if alpha >= 1.0 else t_factor / zeta
    grads = hs * (alpha * t_factor + mu * zeta * (1.0 - alpha)) - rate / total_power**2
    scale = max(float(np.abs(grads).max()), rate / total_power**2, 1e-300)
    ftol = gradient_tol * scale

    violations = []
    if np.any(np.diff(grads) > 1e-12 * scale):
        violations.append("gradients are not descending in sorted-gain order")

    at_cap = ps >= cs * (1.0 - 1e-9)
    at_zero = ps <= 1e-15 * max(1.0, float(cs.max()))
    partial = int(np.argmax(~at_cap)) if not at_cap.all() else n
    if partial < n and not (at_cap[:partial].all() and at_zero[partial + 1 :].all()):
        violations.append("powers do not form a saturated prefix")
    if np.any((grads > ftol) & ~at_cap):
        violations.append("positive gradient at a port below its cap")
    if np.any((grads < -ftol) & ~at_zero):
        violations.append("negative gradient at a transmitting port")
    if partial < n and not at_zero[partial]:
        pmin = p_min_threshold(
            partial, ScenarioSingle(hs, cs, scenario.min_harvest, params)
        )
        if ps[partial] < pmin * (1.0 - 1e-9) - 1e-300:
            violations.append("partial port sits below its harvest floor")
        interior = ps[partial] > pmin * (1.0 + 1e-9) + 1e-300
        if interior and abs(grads[partial]) > ftol:
            violations.append("partial port is not stationary")
        if not interior and grads[partial] > ftol:
            violations.append("positive gradient at a harvest-floored port")

    lower = np.where(at_zero, np.maximum(-grads, 0.0), 0.0)
    upper = np.where(at_cap, np.maximum(grads, 0.0), 0.0)
    if np.any(np.abs(grads - (upper - lower)) > ftol):
        violations.append("gradient does not split into box multipliers")
    slack_tol = ftol * max(1.0, float(cs.max()))
    if np.any(lower * ps > slack_tol) or np.any(upper * (cs - ps) > slack_tol):
        violations.append("complementary slackness violated")

    if scenario.min_harvest > 0.0:
        harvested = zeta * (1.0 - alpha) * received
        if abs(harvested - scenario.min_harvest) > 1e-9 * scenario.min_harvest:
            violations.append("harvest constraint is not tight")

    if violations:
        raise CertificateError("; ".join(violations))
    return KktCertificate(
        order=order,
        power_gradients=grads,
        alpha_factor=t_factor,
        harvest_multiplier=mu,
        lower_multipliers=lower,
        upper_multipliers=upper,
        partial_index=partial,
    )
