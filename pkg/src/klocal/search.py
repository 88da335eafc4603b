"""Classical k-local search, Grover fallback, and the max-k-SSAT solver loop."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, NamedTuple

import numpy as np

from .combinatorics import fk_ratio, from_bits, to_bits
from .hamiltonian import DiagonalHamiltonian, build_HC, build_Hk, indicator, normalize_HC
from .instances import Instance, count_satisfied, surviving_assignments
from .simulator import AdiabaticParams, Statevector, _apply_mixer_inplace, _apply_phase_inplace, evolve_aqs, sample_measurement

MAX_GROVER_N = 24


class KLocalOracle:
    """f_k oracle for a hidden target; counts how often it is queried."""

    def __init__(self, n: int, k: int, target: int):
        if not 0 <= target < 2**n:
            raise ValueError("target does not fit in n bits")
        self.n, self.k, self._t = n, k, target
        self.calls = 0

    def __call__(self, x: int) -> Fraction:
        self.calls += 1
        return fk_ratio(self.n, self.k, self.n - (x ^ self._t).bit_count())


class InstanceOracle:
    """Normalized satisfied-clause value of a formula, evaluated clause by clause."""

    def __init__(self, inst: Instance):
        if inst.m < 1:
            raise ValueError("instance oracle needs at least one clause")
        self.inst = inst
        self.calls = 0

    def __call__(self, x: int) -> Fraction:
        self.calls += 1
        q = 2**self.inst.k - 1
        return Fraction(q * count_satisfied(self.inst, x) - (q - 1) * self.inst.m, self.inst.m)


def classical_local_search(f: Callable[[int], object], n: int, k: int, seed) -> int:
    """Random restarts until f(x) > 0, then one pass of single-bit improvements.

    Exact for a genuine f_k oracle: once x matches the target on at least k
    bits, fixing any mismatched bit strictly increases f_k.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x = 0
    fx = f(x)
    while fx == 0:
        x = from_bits(rng.integers(0, 2, size=n))
        fx = f(x)
    for j in range(1, n + 1):
        x2 = x ^ (1 << (n - j))
        f2 = f(x2)
        if fx < f2:
            x, fx = x2, f2
    return x


# -- quantum solvers ----------------------------------------------------------


class SolveOutcome(NamedTuple):
    assignment: str
    satisfied: bool
    method: str  # "classical", "aqs" or "grover"
    steps_used: int
    aqs_rounds: int


def verify(inst: Instance, x: int) -> bool:
    return count_satisfied(inst, x) == inst.m


def _first_verified(inst: Instance, shots: np.ndarray) -> int | None:
    for x in dict.fromkeys(int(s) for s in shots):
        if verify(inst, x):
            return x
    return None


def grover_iterations(n: int, M: int) -> int:
    return math.floor(math.pi / 4 * math.sqrt(2**n / M))


@dataclass
class GroverReport:
    outcome: SolveOutcome
    attempts: int
    solutions: int


def grover_solve(inst: Instance, seed, retries: int = 5, *, _rounds: int = 0, _steps: int = 0) -> SolveOutcome:
    """Amplitude amplification on the interpretation indicator, sample, verify.

    Uses the exact interpretation count for the iteration number. With no
    interpretations the result is an explicit failure after ``retries`` tries.
    """
    return grover_report(inst, seed, retries, _rounds=_rounds, _steps=_steps).outcome


def grover_report(inst: Instance, seed, retries: int = 5, *, _rounds: int = 0, _steps: int = 0) -> GroverReport:
    n = inst.n
    if n > MAX_GROVER_N:
        raise ValueError(f"Grover fallback supports n <= {MAX_GROVER_N}, got {n}")
    if retries < 1:
        raise ValueError("need at least one attempt")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    marked = surviving_assignments(inst)
    M = int(marked.sum())
    p = grover_iterations(n, M) if M else grover_iterations(n, 1)
    H_cost, H_mix0 = indicator(n, marked), build_Hk(n, n, 0)
    steps = _steps
    x = 0
    for attempt in range(1, retries + 1):
        psi = Statevector.plus(n)
        for _ in range(p):
            _apply_phase_inplace(psi.amp, H_cost, math.pi)
            _apply_mixer_inplace(psi.amp, H_mix0, math.pi)
        steps += p
        x = sample_measurement(psi, rng)
        if verify(inst, x):
            return GroverReport(SolveOutcome(to_bits(x, n), True, "grover", steps, _rounds), attempt, M)
    return GroverReport(SolveOutcome(to_bits(x, n), False, "grover", steps, _rounds), retries, M)


def solver_cost(inst: Instance) -> DiagonalHamiltonian:
    """Normalized clause Hamiltonian (all zeros for an empty formula)."""
    if inst.m == 0:
        return DiagonalHamiltonian(inst.n, np.zeros(2**inst.n), label="empty")
    return normalize_HC(build_HC(inst), inst.m, inst.k)


def solve_max_kssat(inst: Instance, seed, shots: int = 8, aqs_budget: int | None = None,
                    grover_retries: int = 5, first_steps: int | None = None) -> SolveOutcome:
    """Adiabatic search with schedule length doubling, then a Grover fallback.

    Starts at p = n^2 and doubles while unverified and p <= floor(2^(n/2)).
    Each adiabatic run is measured ``shots`` times. ``aqs_budget`` caps the
    number of adiabatic rounds (0 forces the fallback) and ``first_steps``
    replaces the initial n^2. Every returned assignment is re-checked clause
    by clause.
    """
    n, k = inst.n, inst.k
    if shots < 1:
        raise ValueError("need at least one shot per round")
    rng = np.random.default_rng(seed)
    cap = math.isqrt(2**n)
    H_cost, H_mix0 = solver_cost(inst), build_Hk(n, k, 0)
    T, rounds, steps = (n * n if first_steps is None else first_steps), 0, 0
    while aqs_budget is None or rounds < aqs_budget:
        rounds += 1
        psi = evolve_aqs(n, k, H_cost, AdiabaticParams(T), H_mix0)
        steps += T
        x = _first_verified(inst, sample_measurement(psi, rng, shots))
        if x is not None:
            return SolveOutcome(to_bits(x, n), True, "aqs", steps, rounds)
        if T > cap:
            break
        T *= 2
    return grover_solve(inst, rng, grover_retries, _rounds=rounds, _steps=steps)
