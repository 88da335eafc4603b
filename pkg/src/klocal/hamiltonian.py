"""Diagonal problem Hamiltonians and dense mixer constructions.

A diagonal Hamiltonian is stored as its eigenvalue array indexed by the
assignment integer. The clause Hamiltonian counts satisfied clauses, so the
target sits at the highest energy.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import NamedTuple

import numpy as np

from .combinatorics import binom, fk_table
from .instances import MAX_EXACT_N, Instance

DUMP_MAGIC = b"KLDIAG01"


@dataclass(eq=False)
class DiagonalHamiltonian:
    n: int
    values: np.ndarray
    label: str = field(default="", compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != (2**self.n,):
            raise ValueError(f"expected {2**self.n} eigenvalues, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("eigenvalues must be finite")

    @cached_property
    def levels(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct eigenvalues and, per basis state, the index of its level."""
        uniq, inv = np.unique(self.values, return_inverse=True)
        dtype = np.uint16 if uniq.size < 2**16 else np.int64
        return uniq.astype(float), inv.astype(dtype)

    def __getitem__(self, x):
        return self.values[x]


def hamming_weights(n: int) -> np.ndarray:
    return np.bitwise_count(np.arange(2**n, dtype=np.uint64)).astype(np.int64)


def build_HC(inst: Instance) -> DiagonalHamiltonian:
    """Satisfied-clause count for every assignment (exact integers)."""
    n = inst.n
    if n > MAX_EXACT_N:
        raise ValueError(f"diagonal construction supports n <= {MAX_EXACT_N}, got {n}")
    index = np.arange(2**n, dtype=np.int64)
    falsified = np.zeros(2**n, dtype=np.int64)
    masks, vals = inst.arrays()
    if inst.m:
        pairs, counts = np.unique(np.stack([masks, vals], axis=1), axis=0, return_counts=True)
        for (mask, val), cnt in zip(pairs, counts):
            falsified += cnt * ((index & mask) == val)
    return DiagonalHamiltonian(n, inst.m - falsified, label="H_C")


def normalize_HC(H: DiagonalHamiltonian, m: int, k: int) -> DiagonalHamiltonian:
    """Affine map (2^k - 1) H / m - (2^k - 2); interpretations land on exactly 1."""
    if m < 1:
        raise ValueError("normalization needs at least one clause")
    q = 2**k - 1
    # counts are exact, so q*count - (q-1)*m is exact before the single division
    vals = (q * np.asarray(H.values, dtype=np.int64) - (q - 1) * m) / m
    return DiagonalHamiltonian(H.n, vals, label="H_C normalized")


def build_Hk(n: int, k: int, t: int = 0) -> DiagonalHamiltonian:
    """k-local search Hamiltonian: eigenvalue f_k(x) = C(d, k) / C(n, k)."""
    if not 0 <= t < 2**n:
        raise ValueError("target does not fit in n bits")
    table = fk_table(n, k)
    d = n - np.bitwise_count(np.arange(2**n, dtype=np.uint64) ^ np.uint64(t)).astype(np.int64)
    return DiagonalHamiltonian(n, table[d], label=f"H_{k}")


def indicator(n: int, marked: np.ndarray) -> DiagonalHamiltonian:
    """0/1 diagonal that is 1 on the marked assignments."""
    return DiagonalHamiltonian(n, np.asarray(marked, dtype=float), label="indicator")


class DeviationReport(NamedTuple):
    max_abs: float
    rms: float
    per_d_mean: dict[int, float]


def deviation(A: DiagonalHamiltonian, B: DiagonalHamiltonian, target: int | None = None) -> DeviationReport:
    """Statistics of A - B; grouped by match count with ``target`` when given."""
    if A.n != B.n:
        raise ValueError(f"dimension mismatch: n={A.n} vs n={B.n}")
    diff = np.asarray(A.values, float) - np.asarray(B.values, float)
    per_d: dict[int, float] = {}
    if target is not None:
        d = A.n - np.bitwise_count(np.arange(2**A.n, dtype=np.uint64) ^ np.uint64(target))
        for dd in range(A.n + 1):
            sel = d == dd
            per_d[dd] = float(diff[sel].mean())
    return DeviationReport(float(np.abs(diff).max()), float(np.sqrt(np.mean(diff**2))), per_d)


# -- dense constructions for small-n checks ---------------------------------

MAX_DENSE_N = 10

_H1 = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2)
_I2 = np.eye(2)
_PLUS = np.full((2, 2), 0.5)  # |+><+| = H |0><0| H


def hadamard_tensor(n: int) -> np.ndarray:
    return reduce(np.kron, [_H1] * n, np.eye(1))


def _check_dense(n: int) -> None:
    if n > MAX_DENSE_N:
        raise ValueError(f"dense matrices are limited to n <= {MAX_DENSE_N}, got {n}")


def build_dense_HBk(n: int, k: int, path: str = "conjugate") -> np.ndarray:
    """Dense k-local mixer.

    ``path="conjugate"`` builds H^n diag(H_{k,0}) H^n; ``path="sum"`` builds the
    average over all k-subsets of |+..+><+..+| on that subset.
    """
    _check_dense(n)
    if path == "conjugate":
        Hn = hadamard_tensor(n)
        return Hn @ np.diag(build_Hk(n, k, 0).values) @ Hn
    if path == "sum":
        from itertools import combinations

        out = np.zeros((2**n, 2**n))
        for alpha in combinations(range(n), k):
            ops = [_PLUS if j in alpha else _I2 for j in range(n)]
            out += reduce(np.kron, ops, np.eye(1))
        return out / binom(n, k)
    raise ValueError(f"unknown path {path!r}")


class CircuitCost(NamedTuple):
    n: int
    k: int
    m: int | None
    mixer_terms: int
    clause_terms: int | None
    gate_cost_per_term: int
    per_iteration: int


def circuit_cost_report(n: int | Instance, k: int | None = None, m: int | None = None) -> CircuitCost:
    """Gate-count model: one O(k) multi-controlled phase per mixer or clause term."""
    if isinstance(n, Instance):
        n, k, m = n.n, n.k, n.m
    mixer = binom(n, k)
    cost_terms = m if m is not None else mixer
    return CircuitCost(n, k, m, mixer, m, k, (mixer + cost_terms) * k)


# -- binary dumps -----------------------------------------------------------


def dump_diagonal(H: DiagonalHamiltonian, path: str | os.PathLike) -> None:
    """16-byte header (8-byte magic, uint64 n) then little-endian doubles."""
    with open(path, "wb") as fh:
        fh.write(DUMP_MAGIC + struct.pack("<Q", H.n))
        fh.write(np.asarray(H.values, dtype="<f8").tobytes())


def load_diagonal(path: str | os.PathLike) -> DiagonalHamiltonian:
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) != 16 or head[:8] != DUMP_MAGIC:
            raise ValueError(f"{path}: not a diagonal dump")
        (n,) = struct.unpack("<Q", head[8:])
        vals = np.frombuffer(fh.read(), dtype="<f8")
    if vals.size != 2**n:
        raise ValueError(f"{path}: truncated payload")
    return DiagonalHamiltonian(int(n), vals.astype(float))
