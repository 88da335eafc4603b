"""Statevector engine for k-local quantum search and its adiabatic variant.

The mixer exp(-i a H_B) with H_B = H^n H_{k,0} H^n is applied exactly as
Walsh-Hadamard transform, diagonal phase, Walsh-Hadamard transform. There is
no Trotter error inside one factor.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Union

import numba
import numpy as np

from .hamiltonian import DiagonalHamiltonian, build_Hk

NORM_TOL = 1e-9

Target = Union[int, np.ndarray]


class NormError(AssertionError):
    """Raised when a state drifts off the unit sphere."""


class ConvergenceError(RuntimeError):
    pass


# -- kernels ----------------------------------------------------------------


@numba.njit(cache=True)
def _butterflies(a):
    # unnormalized in-place Walsh-Hadamard, two stages per sweep (radix 4)
    size = a.size
    h = 1
    while 4 * h <= size:
        for i in range(0, size, 4 * h):
            for j in range(i, i + h):
                x0 = a[j]
                x1 = a[j + h]
                x2 = a[j + 2 * h]
                x3 = a[j + 3 * h]
                s0 = x0 + x1
                d0 = x0 - x1
                s1 = x2 + x3
                d1 = x2 - x3
                a[j] = s0 + s1
                a[j + h] = d0 + d1
                a[j + 2 * h] = s0 - s1
                a[j + 3 * h] = d0 - d1
        h *= 4
    if h < size:
        # odd qubit count: one radix-2 stage left over
        for j in range(h):
            x = a[j]
            y = a[j + h]
            a[j] = x + y
            a[j + h] = x - y


@numba.njit(cache=True)
def _mul_levels(a, table, idx):
    for i in range(a.size):
        a[i] *= table[idx[i]]


def fwht_inplace(a: np.ndarray) -> None:
    """Unitary Walsh-Hadamard transform of a complex array, in place."""
    _butterflies(a)
    a *= 1.0 / math.sqrt(a.size)


def _phase_table(H: DiagonalHamiltonian, angle: float, scale: float = 1.0):
    uniq, idx = H.levels
    return scale * np.exp(-1j * angle * uniq), idx


def _apply_phase_inplace(a: np.ndarray, H: DiagonalHamiltonian, angle: float, scale: float = 1.0) -> None:
    table, idx = _phase_table(H, angle, scale)
    _mul_levels(a, table, idx)


def _apply_mixer_inplace(a: np.ndarray, H_mix0: DiagonalHamiltonian, angle: float) -> None:
    # both transforms left unnormalized; 1/N folded into the phase table
    _butterflies(a)
    _apply_phase_inplace(a, H_mix0, angle, scale=1.0 / a.size)
    _butterflies(a)


# -- state ------------------------------------------------------------------


class Statevector:
    """Unit-norm complex amplitudes over the 2^n computational basis."""

    __slots__ = ("n", "amp")

    def __init__(self, amp: np.ndarray, check: bool = True):
        amp = np.ascontiguousarray(amp, dtype=np.complex128)
        n = amp.size.bit_length() - 1
        if amp.ndim != 1 or 2**n != amp.size:
            raise ValueError("amplitude array length must be a power of two")
        self.n = n
        self.amp = amp
        if check:
            self.check_norm()

    @classmethod
    def plus(cls, n: int) -> "Statevector":
        return cls(np.full(2**n, 2.0 ** (-n / 2), dtype=np.complex128))

    @classmethod
    def basis(cls, n: int, x: int) -> "Statevector":
        amp = np.zeros(2**n, dtype=np.complex128)
        amp[x] = 1.0
        return cls(amp)

    def copy(self) -> "Statevector":
        return Statevector(self.amp.copy(), check=False)

    def norm_error(self) -> float:
        return abs(float(np.vdot(self.amp, self.amp).real) - 1.0)

    def check_norm(self, tol: float = NORM_TOL) -> None:
        err = self.norm_error()
        if not err < tol:
            raise NormError(f"state norm deviates from 1 by {err:.3e}")

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amp) ** 2

    def probability(self, target: Target) -> float:
        return target_probability(self.amp, target)


def target_probability(amp: np.ndarray, target: Target) -> float:
    """|<t|psi>|^2, or the total over a set (int array) or mask (bool array)."""
    if isinstance(target, (int, np.integer)):
        return float(abs(amp[target]) ** 2)
    target = np.asarray(target)
    if target.dtype == bool:
        return float(np.sum(np.abs(amp[target]) ** 2))
    return float(np.sum(np.abs(amp[target.astype(np.int64)]) ** 2))


def _check_dims(psi: Statevector, *hs: DiagonalHamiltonian) -> None:
    for h in hs:
        if h.n != psi.n:
            raise ValueError(f"dimension mismatch: state n={psi.n}, Hamiltonian n={h.n}")


def fwht(psi: Statevector) -> Statevector:
    out = psi.amp.copy()
    fwht_inplace(out)
    return Statevector(out)


def apply_diag_phase(psi: Statevector, H: DiagonalHamiltonian, theta: float) -> Statevector:
    """Multiply amplitude x by exp(-i theta H[x])."""
    _check_dims(psi, H)
    out = psi.amp.copy()
    _apply_phase_inplace(out, H, theta)
    return Statevector(out)


def qs_iterate(psi: Statevector, H_cost: DiagonalHamiltonian, H_mix0: DiagonalHamiltonian, theta: float) -> Statevector:
    """One search iteration: cost phase, then the Hadamard-conjugated mixer phase."""
    _check_dims(psi, H_cost, H_mix0)
    out = psi.amp.copy()
    _apply_phase_inplace(out, H_cost, theta)
    _apply_mixer_inplace(out, H_mix0, theta)
    return Statevector(out)


# -- parameters -------------------------------------------------------------


@dataclass(frozen=True)
class SearchParams:
    theta: float = math.pi
    p: int = 0

    def __post_init__(self):
        if not 0 < self.theta <= math.pi + 1e-12:
            raise ValueError(f"theta must lie in (0, pi], got {self.theta}")
        if self.p < 0:
            raise ValueError("iteration count must be non-negative")


@dataclass(frozen=True)
class AdiabaticParams:
    """Linear-ramp Trotterized schedule with ``p`` steps.

    Step ``l`` (l = 1..p, applied in ascending order) is
    ``exp(-i A w_mix(l) H_B) exp(-i A (l/(p+1)) H_cost)`` with
    ``w_mix(l) = (p + mixer_offset - l) / (p + 1)`` and ``A = step_angle``.

    The default (A = 2 pi, offset 1) is the schedule that meets the published
    T_3(n) iteration counts. A = 2 pi on [0, 1]-valued diagonals equals A = pi
    on their +-1-valued Pauli-Z form up to a global phase. ``step_angle=pi,
    mixer_offset=0`` gives the alternative reading with weights (p - l)/(p + 1).
    """

    p: int
    step_angle: float = 2 * math.pi
    mixer_offset: int = 1

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"adiabatic step count must be >= 1, got {self.p}")
        if self.mixer_offset not in (0, 1):
            raise ValueError("mixer_offset must be 0 or 1")

    def weights(self, l: int) -> tuple[float, float]:
        """(mixer weight, cost weight) of step ``l``."""
        p = self.p
        return (p + self.mixer_offset - l) / (p + 1), l / (p + 1)


# -- drivers ----------------------------------------------------------------


def _mixer_for(n: int, k: int, H_mix0: DiagonalHamiltonian | None) -> DiagonalHamiltonian:
    return build_Hk(n, k, 0) if H_mix0 is None else H_mix0


def run_qs(
    n: int,
    k: int,
    H_cost: DiagonalHamiltonian,
    params: SearchParams,
    t: Target,
    H_mix0: DiagonalHamiltonian | None = None,
) -> np.ndarray:
    """Success probability after 0..p iterations, starting from |+>^n."""
    H_mix0 = _mixer_for(n, k, H_mix0)
    psi = Statevector.plus(n)
    _check_dims(psi, H_cost, H_mix0)
    a = psi.amp
    traj = np.empty(params.p + 1)
    traj[0] = target_probability(a, t)
    for i in range(1, params.p + 1):
        _apply_phase_inplace(a, H_cost, params.theta)
        _apply_mixer_inplace(a, H_mix0, params.theta)
        traj[i] = target_probability(a, t)
    psi.check_norm()
    return traj


def evolve_aqs(
    n: int,
    k: int,
    H_cost: DiagonalHamiltonian,
    params: AdiabaticParams,
    H_mix0: DiagonalHamiltonian | None = None,
) -> Statevector:
    """Final state of the Trotterized adiabatic schedule."""
    H_mix0 = _mixer_for(n, k, H_mix0)
    psi = Statevector.plus(n)
    _check_dims(psi, H_cost, H_mix0)
    a = psi.amp
    for l in range(1, params.p + 1):
        w_mix, w_cost = params.weights(l)
        _apply_phase_inplace(a, H_cost, params.step_angle * w_cost)
        _apply_mixer_inplace(a, H_mix0, params.step_angle * w_mix)
    psi.check_norm()
    return psi


def run_aqs(
    n: int,
    k: int,
    H_cost: DiagonalHamiltonian,
    params: AdiabaticParams,
    t: Target,
    H_mix0: DiagonalHamiltonian | None = None,
) -> float:
    return evolve_aqs(n, k, H_cost, params, H_mix0).probability(t)


class LocalMax(NamedTuple):
    p: int
    prob: float


def find_first_local_max(
    n: int,
    k: int,
    H_cost: DiagonalHamiltonian,
    theta: float,
    t: Target,
    cap: int | None = None,
    H_mix0: DiagonalHamiltonian | None = None,
) -> LocalMax:
    """Smallest p >= 1 with P(p) >= P(p-1) and P(p) > P(p+1).

    Equal neighbours (a plateau) do not count as a maximum; a warning is
    issued when one is crossed.
    """
    SearchParams(theta, 0)
    cap = 16 * n if cap is None else cap
    H_mix0 = _mixer_for(n, k, H_mix0)
    psi = Statevector.plus(n)
    _check_dims(psi, H_cost, H_mix0)
    a = psi.amp
    traj = [target_probability(a, t)]
    for _ in range(cap + 1):
        _apply_phase_inplace(a, H_cost, theta)
        _apply_mixer_inplace(a, H_mix0, theta)
        traj.append(target_probability(a, t))
        p = len(traj) - 2
        if p >= 1:
            prev, cur, nxt = traj[p - 1], traj[p], traj[p + 1]
            if cur == nxt:
                warnings.warn(f"success probability plateau at p={p}", RuntimeWarning, stacklevel=2)
            if cur >= prev and cur > nxt:
                psi.check_norm()
                return LocalMax(p, cur)
    raise ConvergenceError(f"no local maximum within {cap} iterations")


def find_min_threshold_steps(
    n: int,
    k: int,
    H_cost: DiagonalHamiltonian,
    threshold: float,
    t: Target,
    cap: int | None = None,
    step_angle: float = 2 * math.pi,
    mixer_offset: int = 1,
    H_mix0: DiagonalHamiltonian | None = None,
) -> LocalMax:
    """Smallest schedule length p whose final success probability reaches ``threshold``.

    Doubling from p = 1 brackets the crossing, bisection narrows it; this
    assumes the success probability stays above threshold once reached,
    which holds for the k-local search landscapes here.
    """
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    cap = max(math.isqrt(2**n), 4 * n * n) if cap is None else cap
    H_mix0 = _mixer_for(n, k, H_mix0)

    def prob(p: int) -> float:
        return run_aqs(n, k, H_cost, AdiabaticParams(p, step_angle, mixer_offset), t, H_mix0)

    lo, hi = 0, 1
    best = prob(hi)
    while best < threshold:
        if hi >= cap:
            raise ConvergenceError(f"threshold {threshold} not reached within {cap} steps")
        lo, hi = hi, min(2 * hi, cap)
        best = prob(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        pm = prob(mid)
        if pm >= threshold:
            hi, best = mid, pm
        else:
            lo = mid
    return LocalMax(hi, best)


def sample_measurement(psi: Statevector, seed, shots: int | None = None):
    """Draw basis states with probability |amp|^2 (one int, or an array of ``shots``)."""
    psi.check_norm()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cdf = np.cumsum(psi.probabilities())
    u = rng.random(1 if shots is None else shots) * cdf[-1]
    out = np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)
    return int(out[0]) if shots is None else out.astype(np.int64)
