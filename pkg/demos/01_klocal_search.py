"""k-local search on a hidden 20-bit target.

The oracle reports the fraction of k-subsets of bits on which a guess agrees
with the target. Quantum iterations alternate a phase from that value with
the Hadamard-conjugated mixer.
"""
import math

import numpy as np

from klocal.hamiltonian import build_Hk
from klocal.search import KLocalOracle, classical_local_search
from klocal.simulator import SearchParams, find_first_local_max, run_qs

n = 20
for k in (1, 2, 3):
    H = build_Hk(n, k, 0)
    lm = find_first_local_max(n, k, H, math.pi, 0)
    print(f"k={k}: first peak after {lm.p} iterations, success {lm.prob:.3f}")

# the trajectory for k = 3 rises fast, then oscillates
traj = run_qs(n, 3, build_Hk(n, 3, 0), SearchParams(math.pi, 30), 0)
print(np.round(traj[:15], 3))

# plain Grover (k = n) needs about (pi/4) 2^(n/2) iterations
print("Grover iterations at n=20:", round(math.pi / 4 * 2 ** (n / 2)))

# classically, one pass of single-bit flips is enough once f > 0
rng = np.random.default_rng(1)
t = int(rng.integers(0, 2**n))
oracle = KLocalOracle(n, 3, t)
assert classical_local_search(oracle, n, 3, rng) == t
print("classical calls:", oracle.calls)
