"""Adiabatic search on random satisfiable 3-SAT at several clause densities.

Near the satisfiability threshold (about 4.27 clauses per variable) formulas
have few interpretations, and success dips. Small version: n = 12, 20 formulas
per density. Writes CSV and SVG box plots into ./demo_out.
"""
from klocal.harness import ExperimentConfig, emit_outputs, run_density_sweep, summarize

cfg = ExperimentConfig("fig_aqs_density", n_list=(12,), m_spec="n", c_list=(2.5, 4, 5, 7, 10),
                       instance_count=20, seed=7, out_dir="demo_out")
recs = run_density_sweep(cfg)
for (n, m), s in summarize(recs).items():
    print(f"m/n={m / n:5.2f}  median={s.median:.3f}  IQR=[{s.q1:.3f}, {s.q3:.3f}]")

print(emit_outputs(recs, "csv", "demo_out", "density"))
print(emit_outputs(recs, "svg", "demo_out", "density"))
