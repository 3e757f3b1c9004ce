"""Benchmark schemes for the multi-device problem.

Two comparison points for the joint solver: keeping every device's splitting
ratio fixed (power-only optimization), and concentrating each device's
information transmission on its best-gain port while every port still feeds
every harvester.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import SolverStats
from .multi_solver import (
    _finish,
    _infeasible_multi,
    _reduce_alphas_for_harvest,
    _run_core,
    _scale_rows_to_caps,
)

__all__ = [
    "AssociationMap",
    "best_ports",
    "solve_fixed_alpha_multi",
    "solve_nearest_association",
]


def best_ports(scenario):
    """Index of the strongest-gain port for each device (ties: lowest index)."""
    return np.argmax(np.asarray(scenario.gains), axis=0).astype(np.int64)


@dataclass(frozen=True)
class AssociationMap:
    """Per-device serving port, chosen by maximum gain."""

    best_port: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.best_port, dtype=np.int64)
        if bp.ndim != 1:
            raise ValueError("best_port must be a vector of port indices")
        if np.any(bp < 0):
            raise ValueError("port indices must be non-negative")
        object.__setattr__(self, "best_port", bp)

    @classmethod
    def from_scenario(cls, scenario):
        return cls(best_port=best_ports(scenario))


def solve_fixed_alpha_multi(scenario, alpha):
    """Power-only optimization with every splitting ratio pinned to alpha.

    Same machinery as the joint solver with the ratio update disabled.
    Infeasible when some device's harvest floor is unreachable at this ratio
    even at full power.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly inside (0, 1)")
    params = scenario.params
    h = np.asarray(scenario.gains, dtype=float)
    caps = np.asarray(scenario.power_caps, dtype=float)
    e_min = np.asarray(scenario.min_harvest, dtype=float)
    zeta = params.conversion_efficiency
    full = h.T @ caps
    if np.any(zeta * (1.0 - alpha) * full < e_min):
        return _infeasible_multi(scenario)
    best = np.zeros(scenario.n_devices, dtype=np.int64)
    p, alphas, _, stats = _run_core(
        scenario, False, best, False, float(alpha), 1e3, 1e-6, 2000, 50, 1e-6,
    )
    p = np.array(p)
    alphas = np.array(alphas)
    _scale_rows_to_caps(p, caps)
    # The ratios are pinned, so restore any missed harvest floor by blending
    # the powers toward the full-power equal split (feasible by the pre-check).
    kfac = float(scenario.n_devices)
    tot = h.T @ p.sum(axis=1)
    need = e_min / (zeta * (1.0 - alpha))
    t = 0.0
    for k in range(scenario.n_devices):
        if e_min[k] <= 0.0 or tot[k] >= need[k]:
            continue
        denom = full[k] - tot[k]
        if denom > 0.0:
            t = max(t, (need[k] - tot[k]) / denom)
        else:
            t = 1.0
    t = min(max(t, 0.0), 1.0)
    if t > 0.0:
        p *= 1.0 - t
        p += t * (caps / kfac)[:, None]
    return _finish(p, alphas, scenario, stats)


def solve_nearest_association(scenario, ellipsoid_radius=1e3,
                              ellipsoid_tol=1e-6, ellipsoid_max_iter=2000,
                              max_outer=50, dinkelbach_tol=1e-6):
    """Joint solver variant where each device decodes only its best-gain port.

    Information power for device k is concentrated on that port (the others
    carry zero on channel k unless saturated by their D_i), while harvesting
    still collects the total power from every port.
    """
    params = scenario.params
    h = np.asarray(scenario.gains, dtype=float)
    caps = np.asarray(scenario.power_caps, dtype=float)
    e_min = np.asarray(scenario.min_harvest, dtype=float)
    zeta = params.conversion_efficiency
    if np.any(zeta * (h.T @ caps) < e_min):
        return _infeasible_multi(scenario)
    best = best_ports(scenario)
    p, alphas, _, stats = _run_core(
        scenario, True, best, True, 0.5, ellipsoid_radius, ellipsoid_tol,
        ellipsoid_max_iter, max_outer, dinkelbach_tol,
    )
    p = np.array(p)
    alphas = np.array(alphas)
    _scale_rows_to_caps(p, caps)
    _reduce_alphas_for_harvest(p, alphas, h, e_min, zeta)
    return _finish(p, alphas, scenario, stats, nearest_best=best)
