"""Energy-efficiency optimization for SWIPT distributed antenna systems.

A distributed antenna system serves power-splitting receivers that decode
information and harvest energy from the same transmission. This package
solves the energy-efficiency power allocation problems for that setting:
a closed-form optimal solver for the single-device case, a Dinkelbach /
ellipsoid / coordinate-descent solver for the multi-device case, benchmark
schemes, and a Monte-Carlo experiment harness.
"""

from .model import (
    LOG2E,
    MultiSolution,
    ScenarioMulti,
    ScenarioSingle,
    SingleSolution,
    SolverStats,
    SystemParams,
    dbm_to_watts,
    default_system_params,
    ee_single,
    evaluate_multi,
    generate_scenario_multi,
    generate_scenario_single,
    harvested_single,
    nats_to_bits,
    path_gain,
    rate_single,
)
from .scalar_opt import (
    LogFractionProblem,
    bisect_root,
    lambert_w0,
    maximize_log_fraction,
)
from .single_optimal import (
    CertificateError,
    KktCertificate,
    kkt_certificate,
    optimal_alpha,
    p_min_threshold,
    port_coefficients,
    solve_single_optimal,
)
from .single_benchmarks import (
    DinkelbachState,
    bcd_inner_lagrangian,
    bcd_inner_solve,
    dinkelbach_trace,
    solve_dinkelbach_single,
    solve_fixed_alpha,
    solve_se_max,
)
from .multi_solver import (
    BcdWorkspace,
    DualVector,
    EllipsoidState,
    NumericalFailure,
    Subgradient,
    alpha_update,
    bcd_power_update,
    dual_value_and_subgradient,
    ellipsoid_minimize,
    solve_multi,
)
from .multi_benchmarks import (
    AssociationMap,
    best_ports,
    solve_fixed_alpha_multi,
    solve_nearest_association,
)
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    ResultRow,
    config_from_dict,
    config_to_dict,
    emit_results,
    load_config,
    run_experiment,
)

__version__ = "0.1.0"
