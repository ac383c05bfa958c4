"""Spatial convergence study on the manufactured control problem.

For each fractional order s the control problem is solved on a sequence of
graded cylinder meshes at fixed K; the control and state errors against
the exact optimum are fitted against the number of unknowns N. The
expected rates are roughly N^(-1/3) for the control and N^(-2/3) for the
state. Writes report.csv and rates.csv like the CLI would.
"""
from fracopt import ExperimentConfig
from fracopt.harness import run_experiment
from fracopt.mesh import default_zeta

for s in (0.4, 0.8):
    zeta = max(default_zeta(1.0 - 2.0 * s), 3.0)
    cfg = ExperimentConfig(kind="conv-space", s_list=(s,), K=64,
                           M_list=(4, 6, 8, 12, 16), T=0.5, zeta=zeta,
                           out=f"out/space_s{s}")
    report = run_experiment(cfg)
    print(f"\ns = {s} (zeta = {zeta:.2f}):")
    print(f"{'M':>4} {'N':>6} {'err control':>12} {'err state':>12} {'iters':>6}")
    for row in report.rows:
        print(f"{row['M']:>4} {row['N']:>6} {row['err_control']:>12.3e} "
              f"{row['err_state']:>12.3e} {row['iters']:>6}")
    for rate in report.slopes:
        print(f"   slope[{rate['quantity']}] = {rate['slope']:+.3f} "
              f"(fitted on last {rate['levels_used']} levels)")
