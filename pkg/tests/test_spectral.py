import math

import numpy as np
import pytest
import scipy.sparse.linalg

from klocal.hamiltonian import DiagonalHamiltonian, build_dense_HBk, build_HC, build_Hk, normalize_HC
from klocal.instances import generate_Ff
from klocal.simulator import ConvergenceError, SearchParams, qs_iterate, Statevector
from klocal.spectral import (
    OperatorHandle, argmin_gap, gap_scaling_fit, gap_scan, interpolated, one_local_eigenform, one_local_factor,
    sum_spectrum, top_two_eigen, verify_1local_decomposition, verify_exchange_lemma,
)
from _oracles import dense_hadamard, fk_dense_diag


def dense_sum(n, k, cost, wc=1.0, wm=1.0):
    Hn = dense_hadamard(n)
    return wc * np.diag(cost) + wm * Hn @ np.diag(fk_dense_diag(n, k)) @ Hn


def test_apply_matches_dense():
    n, k = 5, 2
    cost = build_Hk(n, k, 13)
    op = OperatorHandle(n, cost, build_Hk(n, k), 0.3, 0.7)
    assert np.abs(op.dense() - dense_sum(n, k, cost.values, 0.3, 0.7)).max() < 1e-13
    v = np.random.default_rng(0).standard_normal((2**n, 3))
    assert np.allclose(op.apply(v), op.dense() @ v, atol=1e-13)


def test_top_two_matches_dense_eigensolve():
    n, k = 6, 3
    r = sum_spectrum(n, k)
    ev = np.linalg.eigvalsh(dense_sum(n, k, fk_dense_diag(n, k)))
    assert r.lambda1 == pytest.approx(ev[-1], abs=1e-9)
    assert r.lambda2 == pytest.approx(ev[-2], abs=1e-9)
    assert r.residual < 1e-9


def test_top_two_on_formula_matches_scipy():
    inst = generate_Ff(10, 60, 3, 4)
    H = normalize_HC(build_HC(inst), inst.m, 3)
    op = interpolated(10, H, 0.4, k=3)
    r = top_two_eigen(op)
    ev = scipy.sparse.linalg.eigsh(scipy.sparse.linalg.LinearOperator((1024, 1024), matvec=op.apply),
                                   k=2, which="LA", tol=1e-12)[0]
    assert sorted([r.lambda1, r.lambda2]) == pytest.approx(sorted(ev), abs=1e-8)


def test_diagonal_only_operator():
    vals = np.random.default_rng(1).permutation(np.linspace(0, 1, 64))
    op = OperatorHandle(6, DiagonalHamiltonian(6, vals), build_Hk(6, 2), 1.0, 0.0)
    r = top_two_eigen(op)
    top = np.sort(vals)[::-1]
    assert (r.lambda1, r.lambda2) == pytest.approx((top[0], top[1]), abs=1e-10)


def test_degenerate_top_is_flagged():
    op = OperatorHandle(3, DiagonalHamiltonian(3, np.array([0, 1, 1, 0.5, 0, 0, 0, 0.2])), build_Hk(3, 1), 1.0, 0.0)
    r = top_two_eigen(op)
    assert r.degenerate and r.gap == 0.0


def test_nonconvergence_raises():
    with pytest.raises(ConvergenceError):
        top_two_eigen(interpolated(10, build_Hk(10, 3), 0.5, k=3), max_iter=3)
    with pytest.raises(ValueError):
        top_two_eigen(interpolated(4, build_Hk(4, 2), 0.5, k=2), tol=0)


def test_gap_endpoints():
    n, k = 8, 3
    res = gap_scan(n, k, build_Hk(n, k), [0.0, 1.0])
    # s = 0: H_B alone has the spectrum of H_{k,0}; s = 1: top spacing 1 - f_k(n - 1)
    top = np.sort(fk_dense_diag(n, k))[::-1]
    assert res[0].gap == pytest.approx(top[0] - top[1], abs=1e-9)
    assert res[1].gap == pytest.approx(3 / n, abs=1e-9)
    with pytest.raises(ValueError):
        gap_scan(n, k, build_Hk(n, k), [1.5])


def test_midpoint_gap_argmin_n12():
    res = gap_scan(12, 3, build_Hk(12, 3), np.linspace(0, 1, 21))
    assert abs(argmin_gap(res).s - 0.5) <= 0.1
    gaps = np.array([r.gap for r in res])
    assert np.allclose(gaps, gaps[::-1], atol=1e-8)


def test_grover_midpoint_gap_halves():
    gaps = []
    for n in (6, 8, 10):
        ev = np.linalg.eigvalsh(0.5 * np.diag(fk_dense_diag(n, n)) + 0.5 * build_dense_HBk(n, n))
        gaps.append(ev[-1] - ev[-2])
        r = top_two_eigen(interpolated(n, build_Hk(n, n), 0.5, k=n))
        assert r.gap == pytest.approx(gaps[-1], abs=1e-9)
    assert gaps[1] / gaps[0] == pytest.approx(0.5, abs=1e-6)
    assert gaps[2] / gaps[1] == pytest.approx(0.5, abs=1e-6)


def test_gap_scaling_slope_k3():
    fit = gap_scaling_fit(3, [8, 10, 12, 14, 16])
    assert -1.3 <= fit.slope <= -0.7
    mid = gap_scaling_fit(3, [8, 10, 12, 14], mode="midpoint")
    assert mid.gaps == pytest.approx(tuple(g / 2 for g in fit.gaps[:4]), abs=1e-9)
    with pytest.raises(ValueError):
        gap_scaling_fit(3, [8, 10, 12])
    with pytest.raises(ValueError):
        gap_scaling_fit(3, [8, 10, 12, 14], mode="other")


def test_one_local_gap_is_sqrt2_over_n():
    for n in (6, 10, 14):
        assert sum_spectrum(n, 1).gap * n == pytest.approx(math.sqrt(2), abs=1e-8)


def test_k_equals_n_gap_decays_exponentially():
    ns = np.array([4, 6, 8, 10, 12])
    gaps = np.array([sum_spectrum(int(n), int(n)).gap for n in ns])

    def r2(x, y):
        coef = np.polyfit(x, y, 1)
        resid = y - np.polyval(coef, x)
        return 1 - resid.var() / y.var()

    assert r2(ns, np.log(gaps)) > 0.999
    assert r2(ns, np.log(gaps)) > r2(np.log(ns), np.log(gaps))
    assert gaps == pytest.approx(2 * 2.0 ** (-ns / 2), rel=1e-3)


def test_exchange_lemma():
    for n, k in [(4, 2), (6, 3), (3, 3), (8, 3), (8, 1)]:
        assert verify_exchange_lemma(n, k) < 1e-12
    assert verify_exchange_lemma(3, 3) < 1e-14
    with pytest.raises(ValueError):
        verify_exchange_lemma(9, 2)


def test_one_local_rotation_is_orthogonal():
    V0, _ = one_local_eigenform(7)
    assert np.abs(V0.T @ V0 - np.eye(2)).max() < 1e-15


def test_one_local_dense_operator_matches_simulator():
    # the per-qubit product carries exp(+i pi Z / 2n); the simulator uses exp(-i pi f_1),
    # so the two agree up to complex conjugation and the global phase -1
    n = 4
    U = np.eye(1)
    for _ in range(n):
        U = np.kron(U, one_local_factor(n))
    S = np.column_stack([qs_iterate(Statevector.basis(n, x), build_Hk(n, 1), build_Hk(n, 1), math.pi).amp
                         for x in range(2**n)])
    assert np.abs(U - (-np.conj(S))).max() < 1e-12


def test_one_local_decomposition_residual_trend():
    r4, r8 = verify_1local_decomposition(4), verify_1local_decomposition(8)
    assert r8 / r4 <= 0.5
    # blockwise evaluation gives the same answer as one dense comparison
    assert verify_1local_decomposition(8, block_qubits=3) == pytest.approx(r8, abs=1e-15)
