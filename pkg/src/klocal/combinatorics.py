"""Exact binomials, match counts, the k-local objective and clause statistics.

Assignments are plain Python ints. Variable ``j`` (1-based) is bit ``n - j`` of
the integer, so the bitstring ``"10110"`` is the int ``0b10110`` and ``x_1`` is
the most significant bit.
"""
from __future__ import annotations

from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

#: Largest ``a`` for which :func:`binom` is tabulated.
MAX_BINOM_N = 256

_PASCAL: list[list[int]] = [[1]]


def _pascal_row(a: int) -> list[int]:
    while len(_PASCAL) <= a:
        prev = _PASCAL[-1]
        _PASCAL.append([1] + [prev[i] + prev[i + 1] for i in range(len(prev) - 1)] + [1])
    return _PASCAL[a]


def binom(a: int, b: int) -> int:
    """Exact binomial coefficient C(a, b), with C(a, b) = 0 for b > a."""
    if a < 0 or b < 0:
        raise ValueError(f"binom needs non-negative arguments, got ({a}, {b})")
    if a > MAX_BINOM_N:
        raise OverflowError(f"binom table is limited to a <= {MAX_BINOM_N}, got {a}")
    if b > a:
        return 0
    return _pascal_row(a)[b]


# Built before any concurrent use; read-only afterwards.
_pascal_row(64)


class MatchCount(NamedTuple):
    n: int
    d: int


def to_bits(x: int, n: int) -> str:
    """Render assignment ``x`` as an n-character bitstring (x_1 first)."""
    return format(x, f"0{n}b")


def from_bits(bits: str | Sequence[int]) -> int:
    if isinstance(bits, str):
        return int(bits, 2) if bits else 0
    x = 0
    for b in bits:
        x = (x << 1) | (1 if b else 0)
    return x


def matches(x: int | str, t: int | str, n: int | None = None) -> MatchCount:
    """Number of bit positions where ``x`` and ``t`` agree.

    Bitstring arguments carry their own length; for int arguments ``n`` is
    required.
    """
    if isinstance(x, str) or isinstance(t, str):
        if not (isinstance(x, str) and isinstance(t, str)):
            raise TypeError("mix of bitstring and int assignments")
        if len(x) != len(t):
            raise ValueError(f"length mismatch: {len(x)} vs {len(t)}")
        n = len(x)
        x, t = from_bits(x), from_bits(t)
    if n is None:
        raise ValueError("n is required for integer assignments")
    if x >> n or t >> n or x < 0 or t < 0:
        raise ValueError(f"assignment does not fit in {n} bits")
    return MatchCount(n, n - (x ^ t).bit_count())


def _check_nk(n: int, k: int) -> None:
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got n={n}, k={k}")


def _as_d(n: int, d: int | MatchCount) -> int:
    if isinstance(d, MatchCount):
        if d.n != n:
            raise ValueError(f"match count is for n={d.n}, not {n}")
        d = d.d
    if not 0 <= d <= n:
        raise ValueError(f"need 0 <= d <= n, got d={d}, n={n}")
    return d


def fk_ratio(n: int, k: int, d: int | MatchCount) -> Fraction:
    """Exact value of C(d, k) / C(n, k)."""
    _check_nk(n, k)
    d = _as_d(n, d)
    return Fraction(binom(d, k), binom(n, k))


def objective_fk(n: int, k: int, d: int | MatchCount) -> float:
    """Fraction of k-subsets of variables on which x fully matches the target."""
    return float(fk_ratio(n, k, d))


def fk_table(n: int, k: int) -> np.ndarray:
    """``objective_fk(n, k, d)`` for d = 0..n as a float array."""
    _check_nk(n, k)
    return np.array([objective_fk(n, k, d) for d in range(n + 1)])


class ClauseStats(NamedTuple):
    mu: float
    sigma2: float


def satisfied_clause_count(n: int, k: int, d: int | MatchCount) -> int:
    """Clauses of S_t (clauses satisfied by t) that are also satisfied by x.

    S_t holds (2^k - 1) C(n, k) clauses; x with d matches satisfies
    (2^k - 2) C(n, k) + C(d, k) of them.
    """
    _check_nk(n, k)
    d = _as_d(n, d)
    return (2**k - 2) * binom(n, k) + binom(d, k)


def clause_stats(n: int, k: int, d: int | MatchCount) -> ClauseStats:
    """Mean and variance of the 0/1 satisfaction of one clause drawn from S_t."""
    _check_nk(n, k)
    d = _as_d(n, d)
    cnk, cdk = binom(n, k), binom(d, k)
    q = 2**k - 1
    mu = Fraction(q - 1, q) + Fraction(cdk, q * cnk)
    sigma2 = (1 - mu) ** 2 * mu + mu**2 * Fraction(cnk - cdk, q * cnk)
    return ClauseStats(float(mu), float(sigma2))
