"""Temporal convergence of the control at fixed spatial resolution.

At desk scale the spatial error against the exact optimum dominates for
every affordable K, so the study measures each run against a reference
solve with 8x more steps on the same mesh, isolating the first-order
decay of the time discretization. For gamma < 1 only monotone decrease is
claimed.
"""
from fracopt import ExperimentConfig
from fracopt.harness import run_convergence_time

for gamma in (1.0, 0.5):
    cfg = ExperimentConfig(kind="conv-time", s_list=(0.4,), gamma=gamma,
                           K_list=(8, 16, 32, 64), M=12, T=1.0)
    report = run_convergence_time(cfg)
    print(f"\ngamma = {gamma}:")
    print(f"{'K':>4} {'err control (vs fine-K ref)':>28} {'err vs exact':>14}")
    for row in report.rows:
        print(f"{row['K']:>4} {row['err_control']:>28.4e} "
              f"{row['err_state']:>14.4e}")
    slope = report.slopes[0]["slope"]
    note = "(expected about -1)" if gamma == 1.0 else "(no rate claimed)"
    print(f"   slope vs K: {slope:+.3f} {note}")
