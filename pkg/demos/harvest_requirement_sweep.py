"""Sweep the harvest requirement and compare all four single-device schemes.

A small-scale version of the energy-efficiency-vs-requirement experiment:
50 fading realizations per point instead of hundreds, so it finishes in
well under a minute. Writes the usual CSV/sidecar pair next to this script.
"""

import os

from swiptdas.harness import ExperimentConfig, emit_results, run_experiment


def main():
    cfg = ExperimentConfig(
        sweep_kind="min_harvest",
        sweep_values=(2e-4, 4e-4, 6e-4, 8e-4, 1e-3, 1.2e-3, 1.4e-3),
        schemes=("optimal", "dinkelbach", "fixed-alpha", "se-max"),
        n_realizations=50,
        base_seed=12,
        n_ports=20,
        power_cap=2.0,
    )
    result = run_experiment(cfg)

    print("mean EE [nats/J] by harvest requirement [mW]:")
    values = sorted({row.sweep_value for row in result.rows})
    header = "  E_min  " + "".join(f"{s:>12}" for s in cfg.schemes)
    print(header)
    for v in values:
        cells = ""
        for scheme in cfg.schemes:
            row = next(r for r in result.rows
                       if r.scheme == scheme and r.sweep_value == v)
            cells += f"{row.ee_mean_nats:12.3f}"
        print(f"  {1e3 * v:5.2f}  {cells}")

    out_dir = os.path.join(os.path.dirname(os.path.abspath(__file__)),
                           "harvest_sweep_out")
    csv_path, sidecar = emit_results(result, out_dir)
    print(f"\nwrote {csv_path}")
    print(f"rerun me exactly: swiptdas experiment --config {sidecar} "
          f"--out <dir>")


if __name__ == "__main__":
    main()
