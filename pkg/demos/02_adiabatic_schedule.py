"""Trotterized adiabatic search: how long must the schedule be for 99%?

Step l applies the mixer with weight (p+1-l)/(p+1) and the cost with weight
l/(p+1), both at angle 2 pi.
"""
from klocal.hamiltonian import build_Hk
from klocal.simulator import AdiabaticParams, find_min_threshold_steps, run_aqs

for n in (10, 12, 14):
    lm = find_min_threshold_steps(n, 3, build_Hk(n, 3, 0), 0.99, 0)
    print(f"n={n}: T={lm.p}, success {lm.prob:.4f}")

# success as the schedule grows at n = 10
H = build_Hk(10, 3, 0)
for p in (10, 25, 50, 75, 98, 150):
    print(p, round(run_aqs(10, 3, H, AdiabaticParams(p), 0), 4))
