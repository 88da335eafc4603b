"""Top-of-spectrum analysis of w_cost * H_cost + w_mix * H_B, matrix free.

The "sum" operator (weights 1, 1) and the adiabatic interpolation
s H_cost + (1 - s) H_B are both OperatorHandles. Everything is real
symmetric, so the eigensolver works in float64.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import NamedTuple, Sequence

import numpy as np

from .hamiltonian import DiagonalHamiltonian, build_dense_HBk, build_Hk
from .simulator import ConvergenceError, _butterflies


@dataclass
class OperatorHandle:
    n: int
    diag_cost: DiagonalHamiltonian
    diag_mix0: DiagonalHamiltonian
    weight_cost: float = 1.0
    weight_mix: float = 1.0

    def __post_init__(self):
        if self.diag_cost.n != self.n or self.diag_mix0.n != self.n:
            raise ValueError("diagonal sizes do not match n")
        self._cost = np.asarray(self.diag_cost.values, float)
        # mixer diagonal pre-scaled by 1/N for the two unnormalized transforms
        self._mix = np.asarray(self.diag_mix0.values, float) / 2**self.n

    def apply(self, v: np.ndarray) -> np.ndarray:
        """H v for a vector or a (2^n, b) block of column vectors."""
        v = np.asarray(v)
        if v.ndim == 2:
            return np.stack([self.apply(v[:, j]) for j in range(v.shape[1])], axis=1)
        out = self.weight_cost * self._cost * v
        if self.weight_mix:
            w = np.ascontiguousarray(v, dtype=np.result_type(v.dtype, np.float64))
            w = w.copy()
            _butterflies(w)
            w *= self._mix
            _butterflies(w)
            out = out + self.weight_mix * w
        return out

    def lower_bound(self) -> float:
        """A value no larger than the smallest eigenvalue."""
        def lo(w, d):
            return w * (d.min() if w >= 0 else d.max())
        return lo(self.weight_cost, self._cost) + lo(self.weight_mix, self._mix * 2**self.n)

    def dense(self) -> np.ndarray:
        if self.n > 12:
            raise ValueError("dense form limited to n <= 12")
        return self.apply(np.eye(2**self.n))


def interpolated(n: int, H_cost: DiagonalHamiltonian, s: float, k: int | None = None,
                 H_mix0: DiagonalHamiltonian | None = None) -> OperatorHandle:
    """s H_cost + (1 - s) H_{B,k}."""
    if H_mix0 is None:
        H_mix0 = build_Hk(n, k, 0)
    return OperatorHandle(n, H_cost, H_mix0, s, 1.0 - s)


class SpectrumResult(NamedTuple):
    s: float | str
    lambda1: float
    lambda2: float
    gap: float
    iterations: int
    residual: float
    degenerate: bool


def top_two_eigen(op: OperatorHandle, tol: float = 1e-10, max_iter: int = 50_000,
                  seed: int = 0, s: float | str = "sum") -> SpectrumResult:
    """Two largest eigenvalues by shifted two-vector subspace iteration.

    The shift makes the operator positive semidefinite, so the wanted
    eigenvalues dominate in magnitude. Each sweep does a Rayleigh-Ritz step on
    the block, which deflates the leading vector out of the second.
    Converged when the Ritz values move by less than ``tol`` and both
    residual norms are below ``10 * tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    N = 2**op.n
    if N < 2:
        raise ValueError("need at least two basis states")
    shift = -op.lower_bound()
    rng = np.random.default_rng(seed)
    V, _ = np.linalg.qr(rng.standard_normal((N, 2)))
    lam_old = np.full(2, np.inf)
    for it in range(1, max_iter + 1):
        W = op.apply(V)
        T = V.T @ W
        lam, S = np.linalg.eigh((T + T.T) / 2)
        order = np.argsort(lam)[::-1]
        lam, S = lam[order], S[:, order]
        V, W = V @ S, W @ S
        res = np.linalg.norm(W - V * lam, axis=0)
        if np.max(np.abs(lam - lam_old)) < tol and res.max() < 10 * tol:
            gap = lam[0] - lam[1]
            degenerate = bool(gap < tol)
            return SpectrumResult(s, float(lam[0]), float(lam[1]), 0.0 if degenerate else float(gap),
                                  it, float(res.max()), degenerate)
        lam_old = lam
        V, _ = np.linalg.qr(W + shift * V)
    raise ConvergenceError(f"top-two eigensolve did not converge in {max_iter} iterations")


def sum_spectrum(n: int, k: int, H_cost: DiagonalHamiltonian | None = None, **kw) -> SpectrumResult:
    """Top of the spectrum of H_{B,k} + H_cost (H_cost defaults to H_k)."""
    H_cost = build_Hk(n, k, 0) if H_cost is None else H_cost
    return top_two_eigen(OperatorHandle(n, H_cost, build_Hk(n, k, 0)), s="sum", **kw)


def gap_scan(n: int, k: int, H_cost: DiagonalHamiltonian, s_grid: Sequence[float], **kw) -> list[SpectrumResult]:
    H_mix0 = build_Hk(n, k, 0)
    out = []
    for s in s_grid:
        if not 0.0 <= s <= 1.0:
            raise ValueError(f"interpolation point {s} outside [0, 1]")
        out.append(top_two_eigen(interpolated(n, H_cost, float(s), H_mix0=H_mix0), s=float(s), **kw))
    return out


def argmin_gap(results: Sequence[SpectrumResult]) -> SpectrumResult:
    return min(results, key=lambda r: r.gap)


class GapFit(NamedTuple):
    slope: float
    intercept: float
    ns: tuple[int, ...]
    gaps: tuple[float, ...]


def gap_scaling_fit(k: int, n_range: Sequence[int], mode: str = "sum", **kw) -> GapFit:
    """Least-squares slope of log(gap) against log(n) for pure k-local search.

    ``mode="sum"`` uses H_{B,k} + H_k, ``mode="midpoint"`` the interpolation at
    s = 1/2 (which is half of it).
    """
    ns = tuple(int(n) for n in n_range)
    if len(ns) < 4:
        raise ValueError("gap scaling fit needs at least four sizes")
    gaps = []
    for n in ns:
        Hk = build_Hk(n, k, 0)
        if mode == "sum":
            r = top_two_eigen(OperatorHandle(n, Hk, Hk), s="sum", **kw)
        elif mode == "midpoint":
            r = top_two_eigen(OperatorHandle(n, Hk, Hk, 0.5, 0.5), s=0.5, **kw)
        else:
            raise ValueError(f"unknown mode {mode!r}")
        gaps.append(r.gap)
    slope, intercept = np.polyfit(np.log(ns), np.log(gaps), 1)
    return GapFit(float(slope), float(intercept), ns, tuple(gaps))


# -- identity checks ----------------------------------------------------------


def verify_exchange_lemma(n: int, k: int) -> float:
    """Max elementwise difference between the two dense mixer constructions."""
    if n > 8:
        raise ValueError("exchange check limited to n <= 8")
    return float(np.abs(build_dense_HBk(n, k, "conjugate") - build_dense_HBk(n, k, "sum")).max())


_H1 = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2)


def one_local_factor(n: int) -> np.ndarray:
    """Single-qubit factor H e^{i pi Z / 2n} H e^{i pi Z / 2n} of the 1-local search operator."""
    e = np.diag([np.exp(1j * math.pi / (2 * n)), np.exp(-1j * math.pi / (2 * n))])
    return _H1 @ e @ _H1 @ e


def one_local_eigenform(n: int) -> tuple[np.ndarray, np.ndarray]:
    """(V0, E0): rotation by pi/8 and eigenphases +-pi / (sqrt(2) n)."""
    a, b = math.cos(math.pi / 8), math.sin(math.pi / 8)
    V0 = np.array([[a, b], [-b, a]])
    ph = math.pi / (math.sqrt(2) * n)
    E0 = np.diag([np.exp(1j * ph), np.exp(-1j * ph)])
    return V0, E0


def verify_1local_decomposition(n: int, block_qubits: int = 8) -> float:
    """max |U_C - V^T E V| over all 2^n x 2^n entries, computed in row blocks."""
    if n > 12:
        raise ValueError("1-local decomposition check limited to n <= 12")
    U0 = one_local_factor(n)
    V0, E0 = one_local_eigenform(n)
    u0 = V0.T @ E0 @ V0
    c = min(n, block_qubits)
    Us = reduce(np.kron, [U0] * c)
    us = reduce(np.kron, [u0] * c)
    worst = 0.0
    for prefix in range(2 ** (n - c)):
        bits = [(prefix >> (n - c - 1 - j)) & 1 for j in range(n - c)]
        pu = reduce(np.kron, [U0[b] for b in bits], np.ones(1))
        pv = reduce(np.kron, [u0[b] for b in bits], np.ones(1))
        worst = max(worst, float(np.abs(np.kron(pu, Us) - np.kron(pv, us)).max()))
    return worst
