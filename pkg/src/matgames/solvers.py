"""First-order solvers for matrix games, each written against the weakest oracle it needs.

Every solver exists twice: as an :class:`~matgames.oracles.Algorithm` state
machine (so it can be driven by an adversary for an exact number of queries)
and as a plain function that runs it against an oracle and returns a
:class:`SolverReport`.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import ENTRY_SLACK, ROW_NORM_SLACK, Geometry
from .oracles import Algorithm, Oracle, OracleKind, Query, Response


@dataclass
class SolverReport:
    final_w: np.ndarray
    logical_iterations: int
    oracle_calls: int
    per_iteration_values: list[float] = field(default_factory=list)
    terminated_early: bool = False

    def csv_rows(self) -> list[dict]:
        return [{"iteration": k + 1, "value": repr(float(v))}
                for k, v in enumerate(self.per_iteration_values)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["iteration", "value"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.csv_rows())
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "final_w": [float(x) for x in self.final_w],
            "logical_iterations": self.logical_iterations,
            "oracle_calls": self.oracle_calls,
            "final_value": float(self.per_iteration_values[-1]) if self.per_iteration_values else None,
            "terminated_early": self.terminated_early,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)


@dataclass(frozen=True)
class SmoothingConfig:
    """Log-sum-exp smoothing of ``min_l (Aw)_l`` with parameter ``mu``.

    For unit-norm rows the smoothed objective has a ``1/mu``-Lipschitz gradient.
    """

    mu: float
    n: int

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.n < 1:
            raise ValueError("n must be positive")

    @property
    def lipschitz(self) -> float:
        return 1.0 / self.mu

    @classmethod
    def for_accuracy(cls, eps: float, n: int) -> "SmoothingConfig":
        """``mu = eps / (2 ln n)``, so the smoothing bias ``mu ln n`` is ``eps/2``."""
        return cls(eps / (2.0 * math.log(max(n, 2))), n)


def smoothed_value_grad(aw, cfg: SmoothingConfig) -> tuple[float, np.ndarray]:
    """Soft minimum ``-mu log sum_l exp(-(Aw)_l / mu)`` and its softmin weights.

    The gradient of ``w -> value`` is ``A^T weights``.
    """
    if not cfg.mu > 0:
        raise ValueError("mu must be positive")
    aw = np.asarray(aw, dtype=np.float64)
    if aw.shape != (cfg.n,):
        raise ValueError(f"expected {cfg.n} payoffs, got shape {aw.shape}")
    m = float(aw.min())
    e = np.exp(-(aw - m) / cfg.mu)
    s = float(e.sum())
    return m - cfg.mu * math.log(s), e / s


def project_l2_ball(w: np.ndarray) -> np.ndarray:
    nrm = float(np.linalg.norm(w))
    return w / nrm if nrm > 1.0 else w


def _softmax(logits: np.ndarray) -> np.ndarray:
    e = np.exp(logits - logits.max())
    return e / e.sum()


# -- Perceptron ---------------------------------------------------------------

class PerceptronAlgorithm(Algorithm):
    """Perceptron on the supergradient oracle: add the worst row until it is positive.

    With ``max_updates`` set, answers received after the cap only test the
    current iterate and never move it.  A margin counts as positive only above
    ``margin_tol * max(1, |w|)``: payoffs that are zero up to rounding must not
    stop the run.
    """

    kind = OracleKind.SUPERGRADIENT

    def __init__(self, d: int, max_updates: int | None = None, margin_tol: float = 1e-12):
        super().__init__()
        self.d = d
        self.max_updates = max_updates
        self.margin_tol = margin_tol
        self.reset()

    def reset(self):
        self.w = np.zeros(self.d)
        self.updates = 0
        self.values: list[float] = []
        self.done = False
        self.exhausted = False

    def _propose(self):
        return Query.supergradient(self.w.copy())

    def _absorb(self, query, response):
        g = response.row
        margin = float(g @ query.w)
        if margin > self.margin_tol * max(1.0, float(np.linalg.norm(query.w))):
            self.done = True
        elif self.max_updates is not None and self.updates >= self.max_updates:
            self.exhausted = True
        else:
            self.values.append(margin)
            self.w = self.w + g
            self.updates += 1

    def output(self):
        return self.w.copy()

    def params(self):
        return {"algorithm": "perceptron"}


def perceptron(oracle: Oracle, max_updates: int) -> SolverReport:
    """Run the Perceptron until the worst row is strictly positive or ``max_updates`` is hit.

    One oracle call per update plus one final call that tests the last iterate.
    """
    if max_updates < 1:
        raise ValueError("max_updates must be at least 1")
    alg = PerceptronAlgorithm(oracle.d, max_updates)
    calls = 0
    while not (alg.done or alg.exhausted):
        alg.absorb(oracle.answer(alg.propose()))
        calls += 1
    return SolverReport(alg.output(), alg.updates, calls, list(alg.values), alg.done)


# -- projected supergradient ascent --------------------------------------------

class SubgradientAlgorithm(Algorithm):
    """Projected supergradient ascent on ``min_l (Aw)_l`` over the unit ball, step ``1/sqrt(T)``."""

    kind = OracleKind.SUPERGRADIENT

    def __init__(self, d: int, T: int):
        super().__init__()
        if T < 1:
            raise ValueError("T must be at least 1")
        self.d = d
        self.T = T
        self.eta = 1.0 / math.sqrt(T)
        self.reset()

    def reset(self):
        self.w = np.zeros(self.d)
        self.total = np.zeros(self.d)
        self.steps = 0
        self.values: list[float] = []

    def _propose(self):
        return Query.supergradient(self.w.copy())

    def _absorb(self, query, response):
        g = response.row
        self.values.append(float(g @ query.w))
        self.w = project_l2_ball(self.w + self.eta * g)
        self.total += self.w
        self.steps += 1

    def output(self):
        if self.steps == 0:
            return self.w.copy()
        return self.total / self.steps

    def params(self):
        return {"algorithm": "subgradient", "eta": self.eta}


def subgradient_method(oracle: Oracle, T: int) -> SolverReport:
    alg = SubgradientAlgorithm(oracle.d, T)
    for _ in range(T):
        alg.absorb(oracle.answer(alg.propose()))
    return SolverReport(alg.output(), T, T, list(alg.values), False)


# -- accelerated gradient on the smoothed objective ----------------------------

class SmoothedAGDAlgorithm(Algorithm):
    """Accelerated ascent of the log-sum-exp smoothed margin over the unit ball.

    Each logical iteration spends two two-sided queries at the same point
    ``y``: the first (with ``p = 0``) reads ``A y``, the second sends the softmin
    weights as ``p`` to read the gradient ``A^T p``. All points stay in the
    ball because ``y`` and ``x`` are convex combinations of ball points.
    """

    kind = OracleKind.TWO_SIDED

    def __init__(self, n: int, d: int, cfg: SmoothingConfig):
        super().__init__()
        if cfg.n != n:
            raise ValueError("smoothing config row count does not match the oracle")
        self.n, self.d, self.cfg = n, d, cfg
        self.reset()

    def reset(self):
        self.x = np.zeros(self.d)
        self.z = np.zeros(self.d)
        self.k = 0
        self.y = np.zeros(self.d)
        self.weights: np.ndarray | None = None
        self.best_y = np.zeros(self.d)
        self.best_value = -math.inf
        self.values: list[float] = []

    @property
    def theta(self) -> float:
        return 2.0 / (self.k + 2.0)

    def _propose(self):
        if self.weights is None:
            return Query.two_sided(np.zeros(self.n), self.y.copy())
        return Query.two_sided(self.weights.copy(), self.y.copy())

    def _absorb(self, query, response):
        if self.weights is None:
            value, self.weights = smoothed_value_grad(response.aw, self.cfg)
            self.values.append(float(np.min(response.aw)))
            if value > self.best_value:
                self.best_value, self.best_y = value, self.y.copy()
            return
        grad = response.pta
        theta = self.theta
        self.z = project_l2_ball(self.z + grad / (theta * self.cfg.lipschitz))
        self.x = (1.0 - theta) * self.x + theta * self.z
        self.k += 1
        self.weights = None
        theta = self.theta
        self.y = (1.0 - theta) * self.x + theta * self.z

    def output(self):
        return self.best_y.copy()

    def params(self):
        return {"algorithm": "agd_smoothed", "mu": self.cfg.mu}


def _check_unit_rows(oracle: Oracle) -> None:
    inst = getattr(oracle, "instance", None)
    if inst is None:
        return
    worst = float(np.max(np.linalg.norm(inst.entries, axis=1)))
    if worst > 1 + ROW_NORM_SLACK:
        raise ValueError(f"smoothed AGD needs unit-norm rows, found norm {worst!r}")


def agd_smoothed(oracle: Oracle, T: int, cfg: SmoothingConfig) -> SolverReport:
    """``T`` accelerated iterations (``2T`` oracle calls); returns the best point by smoothed value."""
    _check_unit_rows(oracle)
    alg = SmoothedAGDAlgorithm(oracle.n, oracle.d, cfg)
    for _ in range(2 * T):
        alg.absorb(oracle.answer(alg.propose()))
    return SolverReport(alg.output(), T, 2 * T, list(alg.values), False)


# -- mirror prox ----------------------------------------------------------------

class MirrorProxAlgorithm(Algorithm):
    """Entropic mirror prox on simplex x simplex with fixed step ``eta``.

    Per logical iteration: query at ``(p, w)``, take a multiplicative-weights
    half step, query at the half point, take the full step from ``(p, w)``.
    The half points are averaged; the duality gap of the averages is
    available from the oracle answers by linearity.
    """

    kind = OracleKind.TWO_SIDED

    def __init__(self, n: int, d: int, eta: float = 0.5):
        super().__init__()
        self.n, self.d, self.eta = n, d, eta
        self.reset()

    def reset(self):
        self.log_w = np.zeros(self.d)
        self.log_p = np.zeros(self.n)
        self.half: tuple[np.ndarray, np.ndarray] | None = None
        self.sum_w = np.zeros(self.d)
        self.sum_p = np.zeros(self.n)
        self.sum_aw = np.zeros(self.n)
        self.sum_pta = np.zeros(self.d)
        self.k = 0
        self.values: list[float] = []

    @property
    def w(self) -> np.ndarray:
        return _softmax(self.log_w)

    @property
    def p(self) -> np.ndarray:
        return _softmax(self.log_p)

    def _propose(self):
        if self.half is None:
            return Query.two_sided(self.p, self.w)
        return Query.two_sided(self.half[1], self.half[0])

    def _absorb(self, query, response):
        if self.half is None:
            hw = _softmax(self.log_w + self.eta * response.pta)
            hp = _softmax(self.log_p - self.eta * response.aw)
            self.half = (hw, hp)
            return
        hw, hp = self.half
        self.log_w = self.log_w + self.eta * response.pta
        self.log_p = self.log_p - self.eta * response.aw
        self.log_w -= self.log_w.max()
        self.log_p -= self.log_p.max()
        self.sum_w += hw
        self.sum_p += hp
        self.sum_aw += response.aw
        self.sum_pta += response.pta
        self.k += 1
        self.half = None
        self.values.append(float(np.max(self.sum_pta) - np.min(self.sum_aw)) / self.k)

    def output(self):
        if self.k == 0:
            return self.w
        return self.sum_w / self.k

    def output_p(self):
        if self.k == 0:
            return self.p
        return self.sum_p / self.k

    def params(self):
        return {"algorithm": "mirror_prox", "eta": self.eta}


def _check_simplex_game(oracle: Oracle) -> None:
    inst = getattr(oracle, "instance", None)
    if inst is None:
        return
    if inst.w_geometry is not Geometry.SIMPLEX:
        raise ValueError(f"mirror prox needs a simplex game, got {inst.w_geometry.value}")
    worst = float(np.max(np.abs(inst.entries)))
    if worst > 1 + ENTRY_SLACK:
        raise ValueError(f"mirror prox needs entries in [-1, 1], found {worst!r}")


def mirror_prox(oracle: Oracle, T: int, eta: float = 0.5) -> tuple[SolverReport, np.ndarray]:
    """``T`` mirror-prox iterations (``2T`` calls); returns averaged ``w`` and ``p``."""
    _check_simplex_game(oracle)
    alg = MirrorProxAlgorithm(oracle.n, oracle.d, eta)
    for _ in range(2 * T):
        alg.absorb(oracle.answer(alg.propose()))
    report = SolverReport(alg.output(), T, 2 * T, list(alg.values), False)
    return report, alg.output_p()


# -- trivial probes used by tests and the harness -------------------------------

class ConstantAlgorithm(Algorithm):
    """Always queries the same vectors and returns a fixed output."""

    def __init__(self, kind: OracleKind, n: int, d: int, output=None, l: int = 0):
        super().__init__()
        self.kind = kind
        self.n, self.d, self.l = n, d, l
        self._out = np.zeros(d) if output is None else np.asarray(output, dtype=float)
        self.reset()

    def reset(self):
        pass

    def _propose(self):
        if self.kind is OracleKind.TWO_SIDED:
            return Query.two_sided(np.zeros(self.n), np.zeros(self.d))
        if self.kind is OracleKind.ONE_SIDED:
            return Query.one_sided(self.l, np.zeros(self.d))
        return Query.supergradient(np.zeros(self.d))

    def _absorb(self, query, response):
        pass

    def output(self):
        return self._out.copy()


class RandomProbeAlgorithm(Algorithm):
    """Queries pseudo-random vectors from a fixed seed; outputs the sum of the answers.

    Deterministic given its seed, so it is a legitimate (if weak) algorithm.
    """

    def __init__(self, kind: OracleKind, n: int, d: int, seed: int = 0):
        super().__init__()
        self.kind = kind
        self.n, self.d, self.seed = n, d, seed
        self.reset()

    def reset(self):
        self.rng = np.random.default_rng(self.seed)
        self.acc = np.zeros(self.d)

    def _propose(self):
        w = self.rng.standard_normal(self.d)
        if self.kind is OracleKind.TWO_SIDED:
            return Query.two_sided(self.rng.standard_normal(self.n), w)
        if self.kind is OracleKind.ONE_SIDED:
            return Query.one_sided(int(self.rng.integers(self.n)), w)
        return Query.supergradient(w)

    def _absorb(self, query, response: Response):
        self.acc += response.pta if response.pta is not None else response.row

    def output(self):
        return self.acc.copy()

    def params(self):
        return {"algorithm": "random_probe", "probe_seed": self.seed}
