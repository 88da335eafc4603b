import collections
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from klocal.combinatorics import clause_stats, from_bits
from klocal.instances import (
    Clause, DimacsError, Instance, clause_satisfied, count_satisfied, dimacs_format, dimacs_parse,
    dimacs_read, dimacs_write, generate_F, generate_Ff, generate_Fs, instance_rng, surviving_assignments,
)
from _oracles import brute_count, clause_true


def test_clause_satisfied_examples():
    assert clause_satisfied(Clause.from_literals([1, -2]), from_bits("10"), 2)
    assert not clause_satisfied(Clause.from_literals([1, 2, 3]), 0, 3)
    assert clause_satisfied(Clause.from_literals([-1, 3, -4]), from_bits("1010"), 4)


def test_clause_validation():
    with pytest.raises(ValueError):
        Clause((2, 1), (True, True))
    with pytest.raises(ValueError):
        Clause((1, 1), (True, False))
    with pytest.raises(ValueError):
        Clause.from_literals([0, 1])
    with pytest.raises(ValueError):
        Instance(3, 2, [Clause.from_literals([1, 4])])
    with pytest.raises(ValueError):
        Instance(3, 3, [Clause.from_literals([1, 2])])


@settings(max_examples=60)
@given(st.integers(1, 8).flatmap(lambda n: st.tuples(
    st.just(n), st.integers(1, n), st.integers(0, 2**n - 1), st.integers(0, 2**30))))
def test_clause_satisfied_matches_literal_evaluation(args):
    n, k, x, seed = args
    c = generate_F(n, 1, k, seed).clauses[0]
    assert clause_satisfied(c, x, n) == clause_true(c.literals(), x, n)


def test_count_satisfied_examples():
    inst = generate_Ff(6, 20, 3, 11)
    assert count_satisfied(inst, inst.planted) == 20
    assert count_satisfied(Instance(5, 3), 7) == 0
    lits = [c.literals() for c in inst.clauses]
    rng = np.random.default_rng(0)
    for x in rng.integers(0, 64, size=10):
        assert count_satisfied(inst, int(x)) == brute_count(lits, int(x), 6)


def test_generate_F_deterministic_and_empty():
    assert generate_F(6, 10, 3, 5) == generate_F(6, 10, 3, 5)
    assert generate_F(6, 10, 3, 5) != generate_F(6, 10, 3, 6)
    assert generate_F(6, 0, 3, 5).m == 0
    with pytest.raises(ValueError):
        generate_F(3, 2, 4, 0)
    with pytest.raises(ValueError):
        generate_F(3, -1, 2, 0)


def test_generate_F_uniform_over_clause_space():
    # 24 clauses of width 2 on 4 variables; counts within 4 sigma of 1000/24
    inst = generate_F(4, 1000, 2, 2024)
    counts = collections.Counter(tuple(c.literals()) for c in inst.clauses)
    assert len(counts) == 24
    mean, sd = 1000 / 24, np.sqrt(1000 * (1 / 24) * (23 / 24))
    assert all(abs(v - mean) <= 4 * sd for v in counts.values())


def test_generate_Ff_uniform_over_satisfied_clauses():
    inst = generate_Ff(4, 5000, 2, 7, t0="0110")
    assert inst.planted == 0b0110
    assert count_satisfied(inst, inst.planted) == inst.m
    counts = collections.Counter(tuple(c.literals()) for c in inst.clauses)
    assert len(counts) == 18
    mean, sd = 5000 / 18, np.sqrt(5000 * (1 / 18) * (17 / 18))
    assert all(abs(v - mean) <= 4 * sd for v in counts.values())


def test_generate_Ff_clause_mean_matches_clause_stats():
    n, k, m, R = 8, 3, 50, 200
    t = 0b10110011
    x = t ^ 0b00000111  # d = 5
    mu, s2 = clause_stats(n, k, 5)
    frac = [count_satisfied(generate_Ff(n, m, k, instance_rng(3, i), t0=t), x) / m for i in range(R)]
    assert abs(np.mean(frac) - mu) <= 3 * np.sqrt(s2) / np.sqrt(R * m)


def test_instance_rng_streams_are_independent():
    a = instance_rng(1, 0).integers(0, 2**32, size=4)
    b = instance_rng(1, 1).integers(0, 2**32, size=4)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, instance_rng(1, 0).integers(0, 2**32, size=4))


def test_generate_Fs_satisfiable_and_exhaustively_verified():
    inst = generate_Fs(12, 144, 3, 5)
    alive = surviving_assignments(inst)
    assert alive.any()
    x = int(np.flatnonzero(alive)[0])
    assert count_satisfied(inst, x) == 144
    assert all(count_satisfied(inst, int(y)) < 144 for y in np.flatnonzero(~alive)[:50])


def test_generate_Fs_rarely_rejects_below_threshold():
    # m well below the satisfiability threshold at n = 16: almost no clause is discarded
    total = sum(generate_Fs(16, 34, 3, instance_rng(9, i)).rejections for i in range(20))
    assert total / (20 * 34) < 0.01


def test_generate_Fs_rejects_past_saturation():
    inst = generate_Fs(6, 200, 3, 1)
    assert surviving_assignments(inst).sum() >= 1
    assert inst.rejections > 0


def test_surviving_assignments_against_full_scan():
    assert surviving_assignments(Instance(5, 3)).all()
    inst = generate_F(10, 100, 3, 3)
    lits = [c.literals() for c in inst.clauses]
    alive = surviving_assignments(inst)
    brute = [x for x in range(2**10) if brute_count(lits, x, 10) == 100]
    assert np.flatnonzero(alive).tolist() == brute
    planted = generate_Ff(10, 300, 3, 4)
    assert surviving_assignments(planted)[planted.planted]


def test_surviving_assignments_size_limit():
    with pytest.raises(ValueError):
        surviving_assignments(Instance(30, 3))


def test_dimacs_round_trip(tmp_path):
    inst = generate_Ff(9, 40, 3, 8)
    path = tmp_path / "f.cnf"
    dimacs_write(inst, path)
    assert dimacs_read(path) == inst
    empty = Instance(4, 2)
    dimacs_write(empty, path)
    assert dimacs_read(path, k=2) == empty


def test_dimacs_parse_examples():
    inst = dimacs_parse(["c example", "p cnf 4 2", "1 -3 0", "2 4 0"])
    assert (inst.n, inst.m, inst.k) == (4, 2, 2)
    assert inst.clauses[0] == Clause((1, 3), (True, False))
    # clauses may span lines
    assert dimacs_parse(["p cnf 3 1", "1 -2", "3 0"]).clauses[0].literals() == [1, -2, 3]


@pytest.mark.parametrize("lines", [
    ["p cnf 3"],
    ["p dnf 3 1", "1 2 0"],
    ["1 2 0"],
    ["p cnf 3 1", "1 5 0"],
    ["p cnf 3 2", "1 2 0"],
    ["p cnf 3 1", "1 2"],
    ["p cnf 3 2", "1 2 0", "1 2 3 0"],
    ["p cnf 3 1", "1 x 0"],
    ["p cnf 3 1", "1 1 0"],
    ["c planted 10", "p cnf 3 1", "1 2 0"],
])
def test_dimacs_malformed(lines):
    with pytest.raises(DimacsError):
        dimacs_parse(lines)


def test_dimacs_format_has_planted_comment():
    text = dimacs_format(generate_Ff(5, 3, 2, 1, t0="10101"))
    assert "c planted 10101" in text.splitlines()
