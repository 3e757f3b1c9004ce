"""System model for SWIPT distributed antenna systems with power splitting.

Holds the parameter/scenario/solution containers shared by every solver, the
random scenario generators, and the closed-form evaluators (rate, harvested
power, energy efficiency). All quantities are SI internally: watts, meters,
nats. dBm values are converted at the configuration boundary only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SystemParams",
    "ScenarioSingle",
    "ScenarioMulti",
    "SolverStats",
    "SingleSolution",
    "MultiSolution",
    "dbm_to_watts",
    "nats_to_bits",
    "path_gain",
    "default_system_params",
    "generate_scenario_single",
    "generate_scenario_multi",
    "rate_single",
    "harvested_single",
    "ee_single",
    "evaluate_multi",
]

#: multiply a rate in nats by this to get bits
LOG2E = math.log2(math.e)


def dbm_to_watts(dbm):
    """Convert a power level in dBm to watts."""
    return 10.0 ** ((dbm - 30.0) / 10.0)


def nats_to_bits(x):
    """Convert a rate (or rate-per-joule) from nats to bits."""
    return x * LOG2E


def _readonly(a, dtype=float):
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SystemParams:
    """Physical constants of the deployment, independent of a concrete draw."""

    noise_power: float  # receiver noise power sigma^2 [W]
    circuit_power: float  # constant circuit power consumption p_c [W]
    conversion_efficiency: float  # RF-to-DC efficiency zeta, in (0, 1]
    path_loss_exponent: float  # gamma in the d^-gamma power law
    square_side: float  # side length of the deployment square [m]
    min_distance: float  # distance clamp: gains use max(d, min_distance)
    fading: str = "exponential"  # "exponential" (unit mean) or "none"

    def __post_init__(self):
        if not self.noise_power > 0.0:
            raise ValueError("noise_power must be positive")
        if not self.circuit_power > 0.0:
            raise ValueError("circuit_power must be positive")
        if not 0.0 < self.conversion_efficiency <= 1.0:
            raise ValueError("conversion_efficiency must lie in (0, 1]")
        if not self.path_loss_exponent > 0.0:
            raise ValueError("path_loss_exponent must be positive")
        if not self.square_side > 0.0:
            raise ValueError("square_side must be positive")
        if not self.min_distance > 0.0:
            raise ValueError("min_distance must be positive")
        if self.fading not in ("exponential", "none"):
            raise ValueError("fading must be 'exponential' or 'none'")


def default_system_params():
    """Baseline parameter set used throughout the tests and demos.

    -104 dBm noise, 0.5 W circuit power, 60% RF-to-DC conversion, cubic
    path loss over a 10 m square with a 1 m distance clamp.
    """
    return SystemParams(
        noise_power=dbm_to_watts(-104.0),
        circuit_power=0.5,
        conversion_efficiency=0.6,
        path_loss_exponent=3.0,
        square_side=10.0,
        min_distance=1.0,
    )


def path_gain(distance, params):
    """Distance-dependent part of the channel gain: max(d, d_min)^-gamma."""
    d = np.maximum(np.asarray(distance, dtype=float), params.min_distance)
    return d ** (-params.path_loss_exponent)


@dataclass(frozen=True)
class ScenarioSingle:
    """One single-device problem instance: gains, caps, harvest target."""

    gains: np.ndarray  # channel power gains h_i > 0, shape (N,)
    power_caps: np.ndarray  # per-port transmit caps [W], shape (N,)
    min_harvest: float  # harvested-power requirement E-bar [W]
    params: SystemParams

    def __post_init__(self):
        object.__setattr__(self, "gains", _readonly(self.gains))
        object.__setattr__(self, "power_caps", _readonly(self.power_caps))
        if self.gains.ndim != 1 or self.gains.size == 0:
            raise ValueError("gains must be a non-empty 1-D array")
        if self.power_caps.shape != self.gains.shape:
            raise ValueError("power_caps must match gains in shape")
        if not np.all(self.gains > 0.0):
            raise ValueError("gains must be strictly positive")
        if not np.all(self.power_caps > 0.0):
            raise ValueError("power_caps must be strictly positive")
        if not self.min_harvest >= 0.0:
            raise ValueError("min_harvest must be non-negative")

    @property
    def n_ports(self):
        return self.gains.size


@dataclass(frozen=True)
class ScenarioMulti:
    """One multi-device problem instance on orthogonal (FDMA) channels."""

    gains: np.ndarray  # h_{i,k} > 0, shape (N, K): port i to device k
    power_caps: np.ndarray  # per-port total transmit caps [W], shape (N,)
    min_harvest: np.ndarray  # per-device harvest targets [W], shape (K,)
    params: SystemParams

    def __post_init__(self):
        object.__setattr__(self, "gains", _readonly(self.gains))
        object.__setattr__(self, "power_caps", _readonly(self.power_caps))
        object.__setattr__(self, "min_harvest", _readonly(self.min_harvest))
        if self.gains.ndim != 2 or self.gains.size == 0:
            raise ValueError("gains must be a non-empty (N, K) array")
        if self.power_caps.shape != (self.gains.shape[0],):
            raise ValueError("power_caps must have one entry per port")
        if self.min_harvest.shape != (self.gains.shape[1],):
            raise ValueError("min_harvest must have one entry per device")
        if not np.all(self.gains > 0.0):
            raise ValueError("gains must be strictly positive")
        if not np.all(self.power_caps > 0.0):
            raise ValueError("power_caps must be strictly positive")
        if not np.all(self.min_harvest >= 0.0):
            raise ValueError("min_harvest must be non-negative")

    @property
    def n_ports(self):
        return self.gains.shape[0]

    @property
    def n_devices(self):
        return self.gains.shape[1]


@dataclass(frozen=True)
class SolverStats:
    """Iteration bookkeeping attached to every solution."""

    outer_iterations: int = 0
    inner_iterations: int = 0
    converged: bool = True
    final_residual: float = 0.0


@dataclass(frozen=True)
class SingleSolution:
    """Solver output for a single-device instance."""

    powers: np.ndarray  # per-port transmit powers [W]
    ps_ratio: float  # power-splitting ratio routed to the decoder
    rate: float  # achieved rate [nats]
    harvested: float  # harvested power [W]
    ee: float  # energy efficiency [nats/J]; 0 when infeasible
    feasible: bool
    stats: SolverStats = field(default_factory=SolverStats)

    def __post_init__(self):
        object.__setattr__(self, "powers", _readonly(self.powers))
        if np.any(self.powers < 0.0):
            raise ValueError("powers must be non-negative")
        if not 0.0 <= self.ps_ratio <= 1.0:
            raise ValueError("ps_ratio must lie in [0, 1]")
        if not self.feasible and self.ee != 0.0:
            raise ValueError("infeasible solutions must report ee = 0")


@dataclass(frozen=True)
class MultiSolution:
    """Solver output for a multi-device instance."""

    powers: np.ndarray  # p_{i,k} [W], shape (N, K)
    ps_ratios: np.ndarray  # per-device splitting ratios, shape (K,)
    rates: np.ndarray  # per-device rates [nats], shape (K,)
    harvested: np.ndarray  # per-device harvested power [W], shape (K,)
    ee: float  # network energy efficiency [nats/J]; 0 when infeasible
    feasible: bool
    stats: SolverStats = field(default_factory=SolverStats)

    def __post_init__(self):
        object.__setattr__(self, "powers", _readonly(self.powers))
        object.__setattr__(self, "ps_ratios", _readonly(self.ps_ratios))
        object.__setattr__(self, "rates", _readonly(self.rates))
        object.__setattr__(self, "harvested", _readonly(self.harvested))
        if np.any(self.powers < 0.0):
            raise ValueError("powers must be non-negative")
        if np.any(self.ps_ratios < 0.0) or np.any(self.ps_ratios > 1.0):
            raise ValueError("ps_ratios must lie in [0, 1]")
        if not self.feasible and self.ee != 0.0:
            raise ValueError("infeasible solutions must report ee = 0")


def _draw_topology(n_ports, n_devices, seed, params, fading_seed=None):
    """Draw port/device positions and faded gains from nested substreams.

    Substream layout: child 0 drives port positions, child 1 device
    positions, child 2+k the fading column of device k. Growing n_ports or
    n_devices therefore *extends* a layout instead of reshuffling it, which
    keeps sweeps over N or K on common random numbers.

    When `fading_seed` is given, the fading substreams are rooted there
    instead of at `seed`, so one placement can host many independent fading
    draws (nested Monte-Carlo mode).
    """
    children = np.random.SeedSequence(seed).spawn(2 + n_devices)
    if fading_seed is None:
        fading_children = children[2:]
    else:
        fading_children = np.random.SeedSequence(fading_seed).spawn(2 + n_devices)[2:]
    side = params.square_side
    ports = np.random.default_rng(children[0]).uniform(0.0, side, (n_ports, 2))
    devices = np.random.default_rng(children[1]).uniform(0.0, side, (n_devices, 2))
    dist = np.linalg.norm(ports[:, None, :] - devices[None, :, :], axis=2)
    gains = np.empty((n_ports, n_devices))
    for k in range(n_devices):
        rng = np.random.default_rng(fading_children[k])
        if params.fading == "exponential":
            s = np.maximum(rng.exponential(1.0, n_ports), np.finfo(float).tiny)
        else:
            s = np.ones(n_ports)
        gains[:, k] = s * path_gain(dist[:, k], params)
    return gains


def generate_scenario_single(n_ports, seed, params, cap, min_harvest,
                             fading_seed=None):
    """Draw a random single-device instance.

    Ports and the device are placed i.i.d. uniformly on the deployment
    square; the gain to port i is an independent unit-mean exponential
    fading draw times max(d_i, min_distance)^-gamma. Deterministic per seed.

    Parameters
    ----------
    n_ports : int
        Number of distributed antenna ports (N >= 1).
    seed : int
        Seed for the draw; equal seeds give bit-identical scenarios.
    params : SystemParams
    cap : float
        Common per-port power cap P-bar [W].
    min_harvest : float
        Harvested-power requirement E-bar [W].
    """
    if n_ports <= 0:
        raise ValueError("n_ports must be positive")
    if cap <= 0.0:
        raise ValueError("cap must be positive")
    if min_harvest < 0.0:
        raise ValueError("min_harvest must be non-negative")
    gains = _draw_topology(n_ports, 1, seed, params, fading_seed)[:, 0]
    return ScenarioSingle(
        gains=gains,
        power_caps=np.full(n_ports, float(cap)),
        min_harvest=float(min_harvest),
        params=params,
    )


def generate_scenario_multi(n_ports, n_devices, seed, params, cap, min_harvest,
                            fading_seed=None):
    """Draw a random multi-device instance (common E-bar for every device).

    Same placement and fading model as the single-device generator; with
    n_devices=1 the gain column is bit-identical to the single draw.
    """
    if n_ports <= 0:
        raise ValueError("n_ports must be positive")
    if n_devices <= 0:
        raise ValueError("n_devices must be positive")
    if cap <= 0.0:
        raise ValueError("cap must be positive")
    if min_harvest < 0.0:
        raise ValueError("min_harvest must be non-negative")
    gains = _draw_topology(n_ports, n_devices, seed, params, fading_seed)
    return ScenarioMulti(
        gains=gains,
        power_caps=np.full(n_ports, float(cap)),
        min_harvest=np.full(n_devices, float(min_harvest)),
        params=params,
    )


def rate_single(alpha, powers, scenario):
    """Decoder rate ln(1 + alpha * sum_i h_i p_i / sigma^2) in nats."""
    powers = np.asarray(powers, dtype=float)
    if powers.shape != scenario.gains.shape:
        raise ValueError("powers must match the scenario's gains in shape")
    received = float(scenario.gains @ powers)
    return math.log1p(alpha * received / scenario.params.noise_power)


def harvested_single(alpha, powers, scenario):
    """Harvested power zeta * (1 - alpha) * sum_i h_i p_i in watts."""
    powers = np.asarray(powers, dtype=float)
    if powers.shape != scenario.gains.shape:
        raise ValueError("powers must match the scenario's gains in shape")
    received = float(scenario.gains @ powers)
    return scenario.params.conversion_efficiency * (1.0 - alpha) * received


def ee_single(rate, powers, circuit_power):
    """Energy efficiency rate / (sum_i p_i + p_c) in nats per joule."""
    return rate / (float(np.sum(powers)) + circuit_power)


def evaluate_multi(powers, alphas, scenario):
    """Evaluate a multi-device allocation.

    Returns (rates, harvested, ee) where rates[k] carries the 1/K FDMA
    prefactor, harvested[k] collects RF energy from every port's *total*
    transmit power, and ee is the network rate over total consumed power.
    """
    powers = np.asarray(powers, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    h = scenario.gains
    if powers.shape != h.shape:
        raise ValueError("powers must be an (N, K) array matching the gains")
    if alphas.shape != (scenario.n_devices,):
        raise ValueError("alphas must have one entry per device")
    sigma2 = scenario.params.noise_power
    zeta = scenario.params.conversion_efficiency
    k_dev = scenario.n_devices
    decode = np.einsum("ik,ik->k", h, powers)  # per-channel received power
    port_totals = powers.sum(axis=1)
    received_total = h.T @ port_totals
    rates = np.log1p(alphas * decode / sigma2) / k_dev
    harvested = zeta * (1.0 - alphas) * received_total
    ee = float(rates.sum()) / (float(port_totals.sum()) + scenario.params.circuit_power)
    return rates, harvested, ee
