"""Replicated study: bias, spread, coverage, and relative efficiency.

Runs a small version (B=60) of one benchmark cell per design and prints the
aggregated metrics table.  The full grids behind the published tables are
available through presets, e.g.:

    ecdr simulate --paper-table 2 --reps 1200 --seed 7 --jobs 8 --format csv

Run:  python demos/03_simulation_study.py            (a few minutes)
"""

import os

from ecdr import ModelSpec, run_study

JOBS = os.cpu_count() or 1

cells = [
    ("design 1 (nonlinear outcome mean, log-linear propensities)",
     ModelSpec.model1(4), 1000),
    ("design 2 case ii (linear outcome mean, shifted external block)",
     ModelSpec.model2("ii", 4), 800),
]

for title, spec, size in cells:
    table = run_study(spec, sizes=[size], reps=60, seed=3, jobs=JOBS)
    print(f"\n{title}, size={size}, B=60")
    print(f"  oracle effect = {table.rows[0]['theta_star']:+.4f}")
    print(f"  {'method':6s} {'bias':>7s} {'sd':>6s} {'se':>6s} {'cover':>6s} {'ARE':>6s}")
    for method in ("nv", "eff", "safe"):
        c = table.cell(size, method)
        print(f"  {method:6s} {c['bias']:+7.3f} {c['sd']:6.3f} {c['mean_se']:6.3f} "
              f"{c['coverage']:6.3f} {c['are']:6.3f}")
