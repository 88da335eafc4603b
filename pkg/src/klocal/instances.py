"""Clauses, instances, the random models F / F_s / F_f, and DIMACS I/O."""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .combinatorics import binom, from_bits, to_bits

#: Largest n for which the exhaustive survivor oracle is allowed.
MAX_EXACT_N = 26


@dataclass(frozen=True, order=True)
class Clause:
    """A disjunction of k literals in canonical (sorted-variable) form.

    ``vars`` are 1-based variable indices, ``signs[i]`` is True for the
    positive literal ``x_{vars[i]}``.
    """

    vars: tuple[int, ...]
    signs: tuple[bool, ...]

    def __post_init__(self):
        if len(self.vars) != len(self.signs):
            raise ValueError("vars and signs differ in length")
        if any(a >= b for a, b in zip(self.vars, self.vars[1:])):
            raise ValueError(f"clause variables must be distinct and sorted: {self.vars}")
        if self.vars and self.vars[0] < 1:
            raise ValueError("variable indices start at 1")

    @classmethod
    def from_literals(cls, lits: Iterable[int]) -> "Clause":
        """Build from DIMACS-style signed literals, e.g. ``[1, -3]``."""
        lits = sorted(lits, key=abs)
        if any(l == 0 for l in lits):
            raise ValueError("literal 0 is not a variable")
        return cls(tuple(abs(l) for l in lits), tuple(l > 0 for l in lits))

    @property
    def k(self) -> int:
        return len(self.vars)

    def literals(self) -> list[int]:
        return [v if s else -v for v, s in zip(self.vars, self.signs)]

    def falsifying(self, n: int) -> tuple[int, int]:
        """(mask, value) such that x falsifies the clause iff ``x & mask == value``."""
        mask = value = 0
        for v, s in zip(self.vars, self.signs):
            bit = 1 << (n - v)
            mask |= bit
            if not s:
                value |= bit
        return mask, value


def clause_satisfied(c: Clause, x: int, n: int) -> bool:
    mask, value = c.falsifying(n)
    return (x & mask) != value


@dataclass
class Instance:
    n: int
    k: int
    clauses: list[Clause] = field(default_factory=list)
    planted: int | None = None
    #: Candidate clauses discarded while generating from F_s.
    rejections: int = field(default=0, compare=False)

    def __post_init__(self):
        for c in self.clauses:
            if c.k != self.k:
                raise ValueError(f"clause width {c.k} != k={self.k}")
            if c.vars and c.vars[-1] > self.n:
                raise ValueError(f"clause {c.literals()} references a variable beyond n={self.n}")
        if self.planted is not None and not 0 <= self.planted < 2**self.n:
            raise ValueError("planted assignment does not fit in n bits")

    @property
    def m(self) -> int:
        return len(self.clauses)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Clause falsifying masks and values as int64 arrays of length m."""
        mv = [c.falsifying(self.n) for c in self.clauses]
        if not mv:
            return np.zeros(0, np.int64), np.zeros(0, np.int64)
        masks, values = zip(*mv)
        return np.array(masks, np.int64), np.array(values, np.int64)


def count_satisfied(inst: Instance, x: int) -> int:
    return sum(clause_satisfied(c, x, inst.n) for c in inst.clauses)


# -- random streams ---------------------------------------------------------


def instance_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Independent stream for instance ``index`` under master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _check_params(n: int, m: int, k: int) -> None:
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got n={n}, k={k}")
    if m < 0:
        raise ValueError(f"m must be non-negative, got {m}")


def _random_vars(rng: np.random.Generator, n: int, k: int) -> tuple[int, ...]:
    return tuple(sorted(int(v) + 1 for v in rng.choice(n, size=k, replace=False)))


def random_clause(rng: np.random.Generator, n: int, k: int) -> Clause:
    """Uniform draw from the 2^k C(n, k) clauses with k distinct variables."""
    vs = _random_vars(rng, n, k)
    return Clause(vs, tuple(bool(b) for b in rng.integers(0, 2, size=k)))


def _var_batch(rng: np.random.Generator, n: int, k: int, size: int) -> np.ndarray:
    """``size`` uniform k-subsets of 1..n as a sorted (size, k) int array."""
    return np.sort(np.argsort(rng.random((size, n)), axis=1)[:, :k], axis=1) + 1


def _clauses_from_arrays(vs: np.ndarray, signs: np.ndarray) -> list[Clause]:
    return [Clause(tuple(v), tuple(s)) for v, s in zip(vs.tolist(), signs.tolist())]


def random_clauses(rng: np.random.Generator, n: int, k: int, size: int) -> list[Clause]:
    """``size`` independent uniform clauses (vectorized form of :func:`random_clause`)."""
    return _clauses_from_arrays(_var_batch(rng, n, k, size), rng.integers(0, 2, size=(size, k)).astype(bool))


def random_clause_satisfied_by(rng: np.random.Generator, n: int, k: int, t: int) -> Clause:
    """Uniform draw from the (2^k - 1) C(n, k) clauses satisfied by ``t``."""
    return random_clauses_satisfied_by(rng, n, k, t, 1)[0]


def random_clauses_satisfied_by(rng: np.random.Generator, n: int, k: int, t: int, size: int) -> list[Clause]:
    vs = _var_batch(rng, n, k, size)
    # sign code bit i set <=> literal i positive; exactly one code falsifies t,
    # the one whose literal i is positive iff t has x_{v_i} = 0
    tbits = (t >> (n - vs)) & 1
    bad = ((1 - tbits) << np.arange(k)).sum(axis=1)
    code = rng.integers(0, 2**k - 1, size=size)
    code = code + (code >= bad)
    signs = ((code[:, None] >> np.arange(k)) & 1).astype(bool)
    return _clauses_from_arrays(vs, signs)


def generate_F(n: int, m: int, k: int, seed) -> Instance:
    _check_params(n, m, k)
    return Instance(n, k, random_clauses(_as_rng(seed), n, k, m))


def generate_Ff(n: int, m: int, k: int, seed, t0: int | str | None = None) -> Instance:
    """Planted model: every clause is satisfied by ``t0`` (drawn if not given)."""
    _check_params(n, m, k)
    rng = _as_rng(seed)
    if t0 is None:
        t0 = int(rng.integers(0, 2**n))
    elif isinstance(t0, str):
        if len(t0) != n:
            raise ValueError("planted bitstring length differs from n")
        t0 = from_bits(t0)
    if not 0 <= t0 < 2**n:
        raise ValueError("planted assignment does not fit in n bits")
    return Instance(n, k, random_clauses_satisfied_by(rng, n, k, t0, m), planted=t0)


def _check_exact(n: int) -> None:
    if n > MAX_EXACT_N:
        raise ValueError(f"exact satisfiability oracle supports n <= {MAX_EXACT_N}, got {n}")


def falsified_mask(c: Clause, n: int, index: np.ndarray | None = None) -> np.ndarray:
    """Boolean array over all 2^n assignments marking those that falsify ``c``."""
    if index is None:
        index = np.arange(2**n, dtype=np.int64)
    mask, value = c.falsifying(n)
    return (index & mask) == value


def generate_Fs(n: int, m: int, k: int, seed, max_redraws: int = 100_000) -> Instance:
    """Satisfiable model by per-clause rejection.

    Clauses are drawn as in F and appended one at a time; a clause that would
    leave no satisfying assignment is discarded and redrawn.
    """
    _check_params(n, m, k)
    _check_exact(n)
    rng = _as_rng(seed)
    index = np.arange(2**n, dtype=np.int64)
    alive = np.ones(2**n, dtype=bool)
    clauses: list[Clause] = []
    redraws = 0
    batch: list[Clause] = []
    while len(clauses) < m:
        if not batch:
            batch = random_clauses(rng, n, k, max(m - len(clauses), 16))[::-1]
        c = batch.pop()
        nxt = alive & ~falsified_mask(c, n, index)
        if nxt.any():
            alive = nxt
            clauses.append(c)
        else:
            redraws += 1
            if redraws > max_redraws:
                raise RuntimeError("F_s generation exceeded its redraw budget")
    return Instance(n, k, clauses, rejections=redraws)


def surviving_assignments(inst: Instance) -> np.ndarray:
    """Boolean array of length 2^n marking every interpretation of ``inst``."""
    _check_exact(inst.n)
    index = np.arange(2**inst.n, dtype=np.int64)
    alive = np.ones(2**inst.n, dtype=bool)
    for c in inst.clauses:
        alive &= ~falsified_mask(c, inst.n, index)
    return alive


# -- DIMACS -----------------------------------------------------------------


class DimacsError(ValueError):
    pass


def dimacs_format(inst: Instance) -> str:
    """DIMACS CNF text. The planted target goes in a ``c planted <bits>`` comment."""
    lines = [f"c k {inst.k}"]
    if inst.planted is not None:
        lines.append(f"c planted {to_bits(inst.planted, inst.n)}")
    lines.append(f"p cnf {inst.n} {inst.m}")
    lines += [" ".join(map(str, c.literals())) + " 0" for c in inst.clauses]
    return "\n".join(lines) + "\n"


def dimacs_write(inst: Instance, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dimacs_format(inst))


def dimacs_read(path: str | os.PathLike, k: int | None = None) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return dimacs_parse(fh.read().splitlines(), k=k)


def dimacs_parse(lines: Sequence[str], k: int | None = None) -> Instance:
    n = m = None
    planted_bits = None
    tokens: list[int] = []
    for raw in lines:
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        if line.startswith("c"):
            parts = line.split()
            if len(parts) == 3 and parts[1] == "planted":
                planted_bits = parts[2]
            elif len(parts) == 3 and parts[1] == "k" and k is None:
                k = int(parts[2])
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise DimacsError(f"malformed header: {line!r}")
            try:
                n, m = int(parts[2]), int(parts[3])
            except ValueError as exc:
                raise DimacsError(f"malformed header: {line!r}") from exc
            continue
        if n is None:
            raise DimacsError("clause before 'p cnf' header")
        try:
            tokens += [int(tok) for tok in line.split()]
        except ValueError as exc:
            raise DimacsError(f"bad literal in line {line!r}") from exc
    if n is None:
        raise DimacsError("missing 'p cnf' header")

    clauses: list[Clause] = []
    cur: list[int] = []
    for lit in tokens:
        if lit == 0:
            if abs(max(cur, key=abs, default=0)) > n:
                raise DimacsError(f"literal out of range in clause {cur}")
            try:
                clauses.append(Clause.from_literals(cur))
            except ValueError as exc:
                raise DimacsError(f"invalid clause {cur}: {exc}") from exc
            cur = []
        else:
            cur.append(lit)
    if cur:
        raise DimacsError("last clause is not terminated by 0")
    if len(clauses) != m:
        raise DimacsError(f"header declares {m} clauses, found {len(clauses)}")
    if k is None:
        if not clauses:
            raise DimacsError("cannot infer clause width from an empty formula")
        k = clauses[0].k
    for c in clauses:
        if c.k != k:
            raise DimacsError(f"clause {c.literals()} has width {c.k}, expected {k}")
    planted = None
    if planted_bits is not None:
        if len(planted_bits) != n or set(planted_bits) - {"0", "1"}:
            raise DimacsError(f"bad planted bitstring {planted_bits!r}")
        planted = from_bits(planted_bits)
    return Instance(n, k, clauses, planted=planted)


def clause_space_size(n: int, k: int) -> int:
    return 2**k * binom(n, k)
