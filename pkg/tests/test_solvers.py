import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import logsumexp, softmax

from matgames.adversaries import OneSidedAdversary
from matgames.core import GameInstance, Geometry, NormContract, duality_gap, min_payoff
from matgames.harness import planted_margin_instance
from matgames.oracles import DenseOracle, OracleKind, drive_interaction
from matgames.solvers import (
    MirrorProxAlgorithm,
    RandomProbeAlgorithm,
    SmoothedAGDAlgorithm,
    SmoothingConfig,
    agd_smoothed,
    mirror_prox,
    perceptron,
    smoothed_value_grad,
    subgradient_method,
)

from oracle_refs import l2_margin


# -- smoothing -------------------------------------------------------------------

def test_smoothing_symmetric_example():
    value, weights = smoothed_value_grad([0.0, 0.0], SmoothingConfig(1.0, 2))
    assert value == pytest.approx(-math.log(2), abs=1e-15)
    np.testing.assert_array_equal(weights, [0.5, 0.5])


def test_smoothing_config_for_accuracy():
    cfg = SmoothingConfig.for_accuracy(0.2, 100)
    assert cfg.mu == pytest.approx(0.1 / math.log(100), rel=1e-15)
    assert cfg.lipschitz == pytest.approx(1 / cfg.mu, rel=1e-15)
    with pytest.raises(ValueError):
        SmoothingConfig(0.0, 3)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 40), st.floats(1e-3, 10), st.integers(0, 2**32 - 1))
def test_smoothing_sandwich_and_reference(n, mu, seed):
    aw = np.random.default_rng(seed).standard_normal(n) * 3
    value, weights = smoothed_value_grad(aw, SmoothingConfig(mu, n))
    m = aw.min()
    assert m - mu * math.log(n) <= value <= m
    assert np.all(weights >= 0) and abs(weights.sum() - 1) <= 1e-12
    assert value == pytest.approx(-mu * logsumexp(-aw / mu), rel=1e-12, abs=1e-12)
    np.testing.assert_allclose(weights, softmax(-aw / mu), rtol=1e-10, atol=1e-15)


def test_smoothing_gradient_finite_differences(rng):
    A = rng.standard_normal((20, 10))
    cfg = SmoothingConfig(0.1, 20)

    def f(w):
        return smoothed_value_grad(A @ w, cfg)[0]

    h = 1e-5
    for _ in range(10):
        w = rng.standard_normal(10)
        grad = A.T @ smoothed_value_grad(A @ w, cfg)[1]
        fd = np.array([(f(w + h * e) - f(w - h * e)) / (2 * h) for e in np.eye(10)])
        assert np.linalg.norm(grad - fd) <= 1e-5 * np.linalg.norm(fd)


# -- perceptron --------------------------------------------------------------------

def test_perceptron_single_row():
    rep = perceptron(DenseOracle([[0.0, 1.0]]), 10)
    assert rep.logical_iterations == 1 and rep.terminated_early
    np.testing.assert_array_equal(rep.final_w, [0.0, 1.0])


def test_perceptron_inseparable_runs_to_cap():
    oracle = DenseOracle([[1.0, 0.0], [-1.0, 0.0]])
    rep = perceptron(oracle, 7)
    assert rep.logical_iterations == 7 and not rep.terminated_early
    assert oracle.calls == 8


def test_perceptron_novikoff_on_orthonormal_adversary():
    adv = OneSidedAdversary(3, 8)
    t = drive_interaction(RandomProbeAlgorithm(OracleKind.ONE_SIDED, 4, 8, 1), adv, 3)
    A, cert = adv.finalize(t.final_output, t)
    assert cert.all_pass
    rep = perceptron(DenseOracle(A), 100)
    assert rep.terminated_early and rep.logical_iterations <= 4


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 30), st.integers(2, 10), st.floats(0.05, 0.9), st.integers(0, 2**32 - 1))
def test_perceptron_early_stop_means_separator(n, d, margin, seed):
    A, _ = planted_margin_instance(n, d, margin, np.random.default_rng(seed))
    rep = perceptron(DenseOracle(A), math.ceil(1 / margin**2) + 1)
    assert rep.terminated_early
    assert rep.logical_iterations <= math.ceil(1 / margin**2)
    assert min_payoff(A, rep.final_w)[0] > 0


# -- subgradient --------------------------------------------------------------------

def test_subgradient_single_row_rate():
    for T in (4, 25, 100):
        rep = subgradient_method(DenseOracle([[1.0, 0.0]]), T)
        assert min_payoff([[1.0, 0.0]], rep.final_w)[0] >= 1 - 2 / math.sqrt(T)


def test_subgradient_one_step():
    rep = subgradient_method(DenseOracle([[3.0, 4.0], [0.0, 1.0]]), 1)
    np.testing.assert_allclose(rep.final_w, [0.6, 0.8], rtol=1e-15)


def test_subgradient_error_shrinks_with_budget():
    ratios = []
    for seed in range(20):
        A, _ = planted_margin_instance(8, 4, 0.3, np.random.default_rng(seed))
        opt = l2_margin(A)
        errs = [opt - min_payoff(A, subgradient_method(DenseOracle(A), T).final_w)[0] for T in (100, 400)]
        ratios.append(errs[0] / max(errs[1], 1e-15))
    assert np.median(ratios) >= 1.5


# -- smoothed AGD ---------------------------------------------------------------------

def test_agd_identity_example():
    A = np.eye(2)
    rep = agd_smoothed(DenseOracle(A), 50, SmoothingConfig(0.05, 2))
    assert rep.oracle_calls == 100 and rep.logical_iterations == 50
    assert min_payoff(A, rep.final_w)[0] >= 1 / math.sqrt(2) - 0.15


def test_agd_iterates_stay_in_ball(rng):
    A, _ = planted_margin_instance(30, 6, 0.2, rng)
    alg = SmoothedAGDAlgorithm(30, 6, SmoothingConfig(0.01, 30))
    oracle = DenseOracle(A)
    for _ in range(200):
        q = alg.propose()
        assert np.linalg.norm(q.w) <= 1 + 1e-12
        alg.absorb(oracle.answer(q))
    assert np.linalg.norm(alg.output()) <= 1 + 1e-12


def test_agd_rejects_long_rows():
    with pytest.raises(ValueError):
        agd_smoothed(DenseOracle(GameInstance([[2.0, 0.0]])), 3, SmoothingConfig(0.1, 1))


def test_agd_more_iterations_help():
    better = 0
    for seed in range(10):
        A, _ = planted_margin_instance(64, 16, 0.1, np.random.default_rng(seed))
        opt = l2_margin(A)
        cfg = SmoothingConfig.for_accuracy(0.02, 64)
        errs = [opt - min_payoff(A, agd_smoothed(DenseOracle(A), T, cfg).final_w)[0] for T in (100, 200)]
        better += errs[1] <= errs[0]
    assert better >= 6


# -- mirror prox ------------------------------------------------------------------------

def _simplex_game(A):
    return GameInstance(A, Geometry.SIMPLEX, NormContract.UNIT_ENTRIES)


def test_mirror_prox_zero_game():
    rep, p = mirror_prox(DenseOracle(_simplex_game([[0.0]])), 1)
    assert rep.per_iteration_values == [0.0]


def test_mirror_prox_matching_pennies():
    A = _simplex_game([[1.0, -1.0], [-1.0, 1.0]])
    rep, p = mirror_prox(DenseOracle(A), 200)
    assert duality_gap(A, rep.final_w, p) <= 0.05
    assert rep.oracle_calls == 400


def test_mirror_prox_reported_gap_matches_dense(rng):
    A = _simplex_game(rng.uniform(-1, 1, (5, 7)))
    rep, p = mirror_prox(DenseOracle(A), 30)
    assert rep.per_iteration_values[-1] == pytest.approx(duality_gap(A, rep.final_w, p), abs=1e-12)


def test_mirror_prox_iterates_on_simplex(rng):
    A = _simplex_game(rng.uniform(-1, 1, (6, 9)))
    alg = MirrorProxAlgorithm(6, 9)
    oracle = DenseOracle(A)
    for _ in range(100):
        q = alg.propose()
        for x in (q.w, q.p):
            assert abs(x.sum() - 1) <= 1e-9 and x.min() >= 0
        alg.absorb(oracle.answer(q))


def test_mirror_prox_gap_shrinks():
    shrink = []
    for seed in range(10):
        A = _simplex_game(np.random.default_rng(seed).uniform(-1, 1, (8, 8)))
        rep, _ = mirror_prox(DenseOracle(A), 200)
        shrink.append(rep.per_iteration_values[199] <= rep.per_iteration_values[49])
    assert np.median(shrink) >= 1


def test_mirror_prox_requires_simplex_game():
    with pytest.raises(ValueError):
        mirror_prox(DenseOracle(GameInstance([[0.5]])), 2)
    with pytest.raises(ValueError):
        mirror_prox(DenseOracle(GameInstance([[1.5]], Geometry.SIMPLEX)), 2)
