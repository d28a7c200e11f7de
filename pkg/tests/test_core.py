import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from matgames.core import (
    BasisFull,
    DegenerateDirection,
    DimensionMismatch,
    GameInstance,
    InfeasibleInput,
    LowRankFactors,
    NormContract,
    OrthoBasis,
    basis_insert,
    duality_gap,
    format_matrix,
    load_matrix,
    dump_matrix,
    lowrank_matvec,
    lowrank_vecmat,
    min_payoff,
    parse_matrix,
    project_complement,
    tridiag_psd_margin,
    tridiag_quadratic_matrix,
    unit_complement,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def brute_min(A, w):
    best, idx = math.inf, -1
    for l in range(A.shape[0]):
        v = sum(A[l, i] * w[i] for i in range(A.shape[1]))
        if v < best:
            best, idx = v, l
    return best, idx


def dense_from_pairs(n, d, pairs):
    A = np.zeros((n, d))
    for a, b in pairs:
        A += np.outer(a, b)
    return A


# -- GameInstance ---------------------------------------------------------------

def test_instance_rejects_nonfinite_and_empty():
    with pytest.raises(ValueError):
        GameInstance([[np.nan]])
    with pytest.raises(DimensionMismatch):
        GameInstance(np.zeros((0, 3)))


def test_instance_norm_contracts():
    GameInstance([[0.6, 0.8]], norm_contract=NormContract.UNIT_ROWS)
    with pytest.raises(ValueError):
        GameInstance([[1.0, 1.0]], norm_contract=NormContract.UNIT_ROWS)
    GameInstance([[1.0, -1.0]], norm_contract=NormContract.UNIT_ENTRIES)
    with pytest.raises(ValueError):
        GameInstance([[1.0 + 1e-9]], norm_contract=NormContract.UNIT_ENTRIES)


def test_instance_is_read_only():
    A = GameInstance(np.eye(2))
    with pytest.raises(ValueError):
        A.entries[0, 0] = 3.0


# -- min_payoff -----------------------------------------------------------------

def test_min_payoff_identity():
    value, l = min_payoff(np.eye(2), [1.0, 0.0])
    assert (value, l) == (0.0, 1)


def test_min_payoff_orthonormal_rows_witness():
    Q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((6, 4)))
    A = Q.T
    value, l = min_payoff(A, A.sum(axis=0) / 2)
    assert value == pytest.approx(0.5, abs=1e-12)
    assert l in range(4)


def test_min_payoff_ties_lowest_index():
    assert min_payoff(np.ones((3, 2)), [0.0, 0.0]) == (0.0, 0)


def test_min_payoff_dimension_check():
    with pytest.raises(DimensionMismatch):
        min_payoff(np.eye(2), [1.0])


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 5), st.data())
def test_min_payoff_matches_scan(n, d, data):
    A = data.draw(arrays(float, (n, d), elements=st.integers(-3, 3).map(float)))
    w = data.draw(arrays(float, d, elements=st.integers(-3, 3).map(float)))
    # integer data keeps both routes exact so ties resolve identically
    assert min_payoff(A, w) == brute_min(A, w)


# -- low rank -------------------------------------------------------------------

def test_lowrank_empty_and_orthogonal():
    F = LowRankFactors(3, 2)
    assert np.array_equal(lowrank_matvec(F, [1.0, 2.0]), np.zeros(3))
    assert np.array_equal(lowrank_vecmat(F, [1.0, 2.0, 3.0]), np.zeros(2))
    F = F.append([1.0, 2.0, 3.0], [1.0, 0.0])
    assert np.array_equal(lowrank_matvec(F, [0.0, 5.0]), np.zeros(3))
    assert np.array_equal(lowrank_vecmat(F, [3.0, 0.0, -1.0]), np.zeros(2))


def test_lowrank_random_pairs(rng):
    pairs = [(rng.standard_normal(6), rng.standard_normal(4)) for _ in range(5)]
    F = LowRankFactors(6, 4, tuple(pairs))
    dense = dense_from_pairs(6, 4, pairs)
    w, p = rng.standard_normal(4), rng.standard_normal(6)
    np.testing.assert_allclose(lowrank_matvec(F, w), dense @ w, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(lowrank_vecmat(F, p), p @ dense, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(F.materialize(), dense, rtol=1e-12, atol=1e-12)


def test_lowrank_rejects_bad_lengths():
    with pytest.raises(DimensionMismatch):
        LowRankFactors(3, 2, ((np.ones(2), np.ones(2)),))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 32), st.integers(1, 32), st.integers(0, 10), st.integers(0, 2**32 - 1))
def test_lowrank_agrees_with_dense(n, d, k, seed):
    r = np.random.default_rng(seed)
    pairs = [(r.standard_normal(n), r.standard_normal(d)) for _ in range(k)]
    F = LowRankFactors(n, d, tuple(pairs))
    dense = dense_from_pairs(n, d, pairs)
    w, p = r.standard_normal(d), r.standard_normal(n)
    scale_w = 1 + np.abs(dense).sum() * np.abs(w).max()
    scale_p = 1 + np.abs(dense).sum() * np.abs(p).max()
    assert np.max(np.abs(lowrank_matvec(F, w) - dense @ w)) <= 1e-12 * scale_w
    assert np.max(np.abs(lowrank_vecmat(F, p) - p @ dense)) <= 1e-12 * scale_p


# -- orthonormal bases ------------------------------------------------------------

def test_basis_insert_examples():
    B, grew = basis_insert(OrthoBasis(3), [1.0, 0.0, 0.0])
    assert grew
    B2, grew = basis_insert(B, [1.0, 1.0, 0.0])
    assert grew
    np.testing.assert_allclose(B2.vectors[1], [0.0, 1.0, 0.0], atol=1e-15)
    B3, grew = basis_insert(B, [2.0, 0.0, 0.0])
    assert not grew and B3 is B


def test_basis_full_raises():
    B = OrthoBasis(2)
    B, _ = basis_insert(B, [1.0, 0.0])
    B, _ = basis_insert(B, [0.0, 1.0])
    assert B.full
    _, grew = basis_insert(B, [3.0, 4.0])
    assert not grew
    with pytest.raises(BasisFull):
        # a negative drop tolerance never treats a vector as dependent
        basis_insert(OrthoBasis(1, (np.array([1.0]),), drop_tol=-1.0), [1.0])


def test_random_inserts_stay_orthonormal(rng):
    B = OrthoBasis(8)
    for _ in range(10):
        B, _ = basis_insert(B, rng.standard_normal(8))
    assert len(B) == 8
    G = B.matrix.T @ B.matrix
    assert np.max(np.abs(G - np.eye(8))) <= 1e-9


def test_project_complement_examples(rng):
    x = rng.standard_normal(4)
    assert np.array_equal(project_complement(OrthoBasis(4), x), x)
    B = OrthoBasis(4)
    for v in rng.standard_normal((2, 4)):
        B, _ = basis_insert(B, v)
    inside = B.matrix @ np.array([0.3, -2.0])
    assert np.linalg.norm(project_complement(B, inside)) <= 1e-9 * np.linalg.norm(inside)


def test_project_complement_random(rng):
    B = OrthoBasis(16)
    for v in rng.standard_normal((5, 16)):
        B, _ = basis_insert(B, v)
    r = project_complement(B, rng.standard_normal(16))
    assert np.max(np.abs(B.matrix.T @ r)) <= 1e-10


def test_unit_complement_examples(rng):
    np.testing.assert_array_equal(unit_complement(OrthoBasis(2), [3.0, 0.0]), [1.0, 0.0])
    B, _ = basis_insert(OrthoBasis(3), [1.0, 0.0, 0.0])
    with pytest.raises(DegenerateDirection):
        unit_complement(B, [1.0, 0.0, 0.0])
    B = OrthoBasis(32)
    for v in rng.standard_normal((4, 32)):
        B, _ = basis_insert(B, v)
    u = unit_complement(B, rng.standard_normal(32))
    assert abs(np.linalg.norm(u) - 1) <= 1e-12
    assert np.max(np.abs(B.matrix.T @ u)) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 24), st.integers(0, 30), st.integers(0, 2**32 - 1), st.booleans())
def test_basis_invariants_under_any_insert_sequence(dim, k, seed, dependent):
    r = np.random.default_rng(seed)
    B = OrthoBasis(dim)
    for _ in range(k):
        if dependent and len(B) and r.random() < 0.5:
            x = B.matrix @ r.standard_normal(len(B))
        else:
            x = r.standard_normal(dim)
        B, _ = basis_insert(B, x)
        assert len(B) <= dim
    if len(B):
        assert np.max(np.abs(B.matrix.T @ B.matrix - np.eye(len(B)))) <= 1e-9
    x = r.standard_normal(dim)
    assert np.max(np.abs(B.matrix.T @ project_complement(B, x)), initial=0.0) <= 1e-9 * np.linalg.norm(x)


# -- duality gap --------------------------------------------------------------------

def test_duality_gap_examples():
    assert duality_gap([[0.0]], [1.0], [1.0]) == 0.0
    pennies = np.array([[1.0, -1.0], [-1.0, 1.0]])
    assert duality_gap(pennies, [0.5, 0.5], [0.5, 0.5]) == 0.0
    assert duality_gap(pennies, [1.0, 0.0], [1.0, 0.0]) == 2.0


def test_duality_gap_rejects_non_simplex():
    with pytest.raises(InfeasibleInput):
        duality_gap(np.eye(2), [0.7, 0.7], [0.5, 0.5])
    with pytest.raises(InfeasibleInput):
        duality_gap(np.eye(2), [1.5, -0.5], [0.5, 0.5])


# -- tridiagonal threshold ---------------------------------------------------------

def test_tridiag_margins_frozen():
    # reference values from a tridiagonal eigensolver
    assert abs(tridiag_psd_margin(2, 1 / math.sqrt(2))) <= 1e-9
    assert tridiag_psd_margin(4, 0.0) == pytest.approx(0.12061475842818625, rel=1e-10)
    assert tridiag_psd_margin(16, 1.05 / 4) == pytest.approx(-0.0011150154274668367, rel=1e-8)
    assert tridiag_psd_margin(16, 1.05 / 4) < 0
    assert tridiag_psd_margin(64, 1 / 8) >= -1e-9


def test_tridiag_rejects_bad_input():
    with pytest.raises(ValueError):
        tridiag_psd_margin(1, 0.5)
    with pytest.raises(ValueError):
        tridiag_psd_margin(3, -0.1)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 40), st.integers(0, 2**32 - 1))
def test_tridiag_quadratic_form(T, seed):
    x = np.random.default_rng(seed).standard_normal(T)
    expected = sum((x[j] - x[j + 1]) ** 2 for j in range(T - 1)) + x[-1] ** 2
    got = x @ tridiag_quadratic_matrix(T) @ x
    assert abs(got - expected) <= 1e-10 * max(1.0, abs(expected))


# -- text format ----------------------------------------------------------------------

def test_matrix_text_round_trip(tmp_path, rng):
    A = rng.standard_normal((3, 4))
    assert np.array_equal(parse_matrix(format_matrix(A)), A)
    dump_matrix(A, tmp_path / "m.txt")
    assert np.array_equal(load_matrix(tmp_path / "m.txt").entries, A)
    assert format_matrix(A).splitlines()[0] == "3 4"


def test_matrix_text_rejects_bad_shape():
    with pytest.raises(DimensionMismatch):
        parse_matrix("2 2\n1 2\n3\n")
    with pytest.raises(ValueError):
        parse_matrix("1 2 3\n")
