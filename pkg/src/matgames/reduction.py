"""Solving l1-ball games with simplex/simplex algorithms.

The map ``psi(A) = [A, -A]`` turns ``max_{|w|_1 <= 1} min_p p^T A w`` into a
simplex game with the same value; ``psi_vec`` and ``psi_inv`` move strategies
between the two domains.
"""
from __future__ import annotations

import numpy as np

from .core import (
    SIMPLEX_TOL,
    GameInstance,
    Geometry,
    InfeasibleInput,
    _check_len,
    as_matrix,
    check_simplex,
)
from .oracles import Algorithm, Oracle, OracleKind, Query, Response

L1_TOL = 1e-12


def psi_matrix(A: GameInstance | np.ndarray) -> GameInstance:
    """``[A, -A]`` as a simplex game; the norm contract carries over."""
    M = as_matrix(A)
    contract = A.norm_contract if isinstance(A, GameInstance) else "none"
    return GameInstance(np.hstack([M, -M]), Geometry.SIMPLEX, contract)


def psi_vec(w) -> np.ndarray:
    """Map ``w`` with ``|w|_1 <= 1`` onto the simplex in ``R^{2d}``.

    Positive entries go to the first ``d`` slots, the magnitudes of the rest to
    the last ``d``.  Any missing mass is split evenly between slots ``0`` and
    ``d``, whose columns of ``psi(A)`` cancel, so ``psi(A) psi_vec(w) = A w``.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("w must be a non-empty vector")
    total = float(np.abs(w).sum())
    if total > 1 + L1_TOL:
        raise InfeasibleInput(f"|w|_1 = {total!r} exceeds 1")
    d = w.size
    out = np.zeros(2 * d)
    pos = w > 0
    out[:d][pos] = w[pos]
    out[d:][~pos] = -w[~pos]
    deficit = 1.0 - float(out.sum())
    if deficit > 0:
        out[0] += deficit / 2
        out[d] += deficit / 2
    return out


def psi_inv(wt, tol: float = SIMPLEX_TOL) -> np.ndarray:
    """``wt[:d] - wt[d:]`` for a simplex vector of even length."""
    wt = np.asarray(wt, dtype=np.float64)
    if wt.ndim != 1 or wt.size == 0 or wt.size % 2:
        raise InfeasibleInput("expected a vector of positive even length")
    check_simplex(wt, tol, what="wt")
    d = wt.size // 2
    return wt[:d] - wt[d:]


class LiftedOracle(Oracle):
    """Two-sided oracle for ``psi(A)`` answered with one query to a two-sided oracle for ``A``."""

    def __init__(self, base: Oracle):
        super().__init__()
        self.base = base
        self.n, self.d = base.n, 2 * base.d
        inst = getattr(base, "instance", None)
        if inst is not None:
            self.instance = psi_matrix(inst)
        self.seed = getattr(base, "seed", None)

    def two_sided(self, p, wt):
        wt = _check_len(wt, self.d, "wt")
        half = self.base.d
        aw, pta = self.base.two_sided(p, wt[:half] - wt[half:])
        self.calls += 1
        return aw, np.concatenate([pta, -pta])

    def config(self):
        out = dict(self.base.config())
        out["lifted"] = True
        return out


def lifted_o2(base: Oracle) -> LiftedOracle:
    return LiftedOracle(base)


class ReducedAlgorithm(Algorithm):
    """Runs a simplex/simplex algorithm on ``psi(A)`` while talking to an oracle for ``A``.

    Each lifted query becomes exactly one base query; the output is
    ``psi_inv`` of the inner algorithm's output.
    """

    kind = OracleKind.TWO_SIDED

    def __init__(self, inner: Algorithm, d: int):
        if inner.kind is not OracleKind.TWO_SIDED:
            raise ValueError("the reduction needs an algorithm using two-sided queries")
        super().__init__()
        self.inner = inner
        self.d = d

    def reset(self):
        self.inner.restart()

    def _propose(self):
        q = self.inner.propose()
        wt = _check_len(q.w, 2 * self.d, "lifted w")
        return Query.two_sided(q.p, wt[: self.d] - wt[self.d:])

    def _absorb(self, query, response):
        lifted = Response(aw=response.aw, pta=np.concatenate([response.pta, -response.pta]))
        self.inner.absorb(lifted)

    def output(self):
        return psi_inv(self.inner.output())

    def lifted_output(self) -> np.ndarray:
        return np.array(self.inner.output(), dtype=np.float64)

    def params(self):
        out = dict(self.inner.params())
        out["reduction"] = "simplex_to_l1"
        return out


def reduce_simplex_to_l1(alg: Algorithm, d: int) -> ReducedAlgorithm:
    """Wrap ``alg`` (built for ``n x 2d`` simplex games) as an algorithm for ``n x d`` l1 games."""
    return ReducedAlgorithm(alg, d)
