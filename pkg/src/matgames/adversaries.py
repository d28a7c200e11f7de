"""Resisting oracles: hard matrices built lazily while answering an algorithm's queries.

``OneSidedAdversary`` answers one-sided and supergradient queries with rows
that are orthonormal and orthogonal to everything queried so far.
``TwoSidedAdversary`` answers two-sided queries from the factored matrix
``sum_j (v_{j-1} - v_j) u_j^T`` where each ``v_t`` is a projected Gaussian and
each ``u_t`` a unit vector orthogonal to the past.  After the interaction both
finalize into a concrete matrix together with a :class:`Certificate`.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import (
    BasisFull,
    DegenerateDirection,
    GameInstance,
    Geometry,
    LowRankFactors,
    NormContract,
    OrthoBasis,
    _check_len,
    basis_insert,
    lowrank_matvec,
    lowrank_vecmat,
    min_payoff,
    project_complement,
    unit_complement,
)
from .oracles import Oracle, OracleKind, Query, QueryRecord, Response, Transcript, replay_verify

MAX_RESAMPLES = 16
ORTHO_TOL = 1e-9


class DimensionExhausted(RuntimeError):
    """No room left to pick a direction orthogonal to everything seen."""


class InstanceTooSmall(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    pass


class AdvGeometry(str, enum.Enum):
    L2 = "l2"
    L1 = "l1"


# -- parameters ---------------------------------------------------------------

def nonsep_condition_lhs(T: int, n: int, delta: float) -> float:
    """Left side of the sufficient condition ``T sqrt(80 log(2T/delta) / n) <= 1/4``."""
    return T * math.sqrt(80.0 * math.log(2.0 * T / delta) / n)


def nonsep_min_rows(T: int, delta: float) -> int:
    return math.ceil(1280.0 * T * T * math.log(2.0 * T / delta))


def default_delta(T: int, geometry: AdvGeometry | str) -> float:
    return 0.1 if AdvGeometry(geometry) is AdvGeometry.L2 else 1.0 / (50.0 * T)


@dataclass(frozen=True)
class AdvParams:
    T: int
    n: int
    d: int
    delta: float
    alpha: float
    beta: float
    geometry: AdvGeometry
    nonsep_lhs: float
    nonsep_holds: bool

    def norm_constraint(self) -> float:
        """Value of the row-norm (L2) or entry (L1) constraint; saturated parameters give 1."""
        T, n, d, delta = self.T, self.n, self.d, self.delta
        if self.geometry is AdvGeometry.L2:
            return 2 * self.alpha**2 + 8 * T * math.log(2 * T * n / delta) * self.beta**2
        scale = math.sqrt(8 * math.log(2 * d / delta) / d)
        return scale * (self.alpha + 2 * T * self.beta * math.sqrt(2 * math.log(2 * T * n / delta)))

    def as_dict(self) -> dict:
        out = asdict(self)
        out["geometry"] = self.geometry.value
        return out


def make_params(T: int, n: int, d: int, delta: float | None = None,
                geometry: AdvGeometry | str = AdvGeometry.L2, strict: bool = True) -> AdvParams:
    """Largest ``beta`` saturating the geometry's norm constraint, with ``alpha = beta / (4 sqrt T)``.

    ``2T + 1 <= min(n, d)`` is always required.  The sufficient non-separation
    condition ``T sqrt(80 log(2T/delta)/n) <= 1/4`` needs very tall matrices;
    it raises only when ``strict`` is set and is otherwise recorded on the
    returned parameters.
    """
    geometry = AdvGeometry(geometry)
    if T < 1:
        raise ValueError("T must be at least 1")
    if delta is None:
        delta = default_delta(T, geometry)
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if 2 * T + 1 > min(n, d):
        which = "n" if n < 2 * T + 1 else "d"
        raise InstanceTooSmall(
            f"need 2T+1 <= min(n, d): 2*{T}+1 = {2 * T + 1} > min({n}, {d}); "
            f"minimal feasible {which} is {2 * T + 1}")
    lhs = nonsep_condition_lhs(T, n, delta)
    holds = lhs <= 0.25
    if strict and not holds:
        raise InstanceTooSmall(
            f"T sqrt(80 log(2T/delta)/n) = {lhs:.4g} > 1/4; "
            f"minimal feasible n is {nonsep_min_rows(T, delta)}")
    log_tn = math.log(2 * T * n / delta)
    if geometry is AdvGeometry.L2:
        beta = 1.0 / math.sqrt(1.0 / (8 * T) + 8 * T * log_tn)
    else:
        scale = math.sqrt(8 * math.log(2 * d / delta) / d)
        beta = 1.0 / (scale * (1.0 / (4 * math.sqrt(T)) + 2 * T * math.sqrt(2 * log_tn)))
    alpha = beta / (4 * math.sqrt(T))
    return AdvParams(T, n, d, delta, alpha, beta, geometry, lhs, holds)


# -- certificates ---------------------------------------------------------------

CSV_FIELDS = ["seed", "T", "n", "d", "delta", "alpha", "beta", "geometry",
              "replay_max_err", "norm_stat", "witness_value", "witness_target",
              "output_min_payoff", "all_pass"]


@dataclass
class Certificate:
    replay_max_err: float
    replay_pass: bool
    norm_stat: float
    norm_pass: bool
    witness_value: float
    witness_target: float
    witness_pass: bool
    output_min_payoff: float
    nonsep_pass: bool
    geometry: str
    T: int
    n: int
    d: int
    seed: int | None = None
    delta: float | None = None
    alpha: float | None = None
    beta: float | None = None
    output_identity_err: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return self.replay_pass and self.norm_pass and self.witness_pass and self.nonsep_pass

    def csv_row(self) -> dict:
        def fmt(x):
            if x is None:
                return ""
            if isinstance(x, bool):
                return str(x).lower()
            if isinstance(x, float):
                return repr(x)
            return str(x)

        row = {k: getattr(self, k) for k in CSV_FIELDS}
        return {k: fmt(v) for k, v in row.items()}


# -- one-sided ------------------------------------------------------------------

class OneSidedAdversary(Oracle):
    """Answers one-sided and supergradient queries for a ``(T+1) x d`` matrix with orthonormal rows.

    Each newly revealed row is a unit vector orthogonal to every queried ``w``
    and every row revealed before it, so all answers remain valid for the
    finalized matrix.
    """

    def __init__(self, T: int, d: int):
        super().__init__()
        if T < 0:
            raise ValueError("T must be nonnegative")
        self.T = T
        self.n = T + 1
        self.d = d
        self.assigned: dict[int, np.ndarray] = {}
        self.queried_ws: list[np.ndarray] = []
        self.basis = OrthoBasis(d)
        self.log: list[QueryRecord] = []
        self._next_k = 0

    def _insert(self, x: np.ndarray) -> None:
        try:
            self.basis, _ = basis_insert(self.basis, x)
        except BasisFull as exc:
            raise DimensionExhausted(f"d = {self.d} is too small for T = {self.T}") from exc

    def _fresh_row(self) -> np.ndarray:
        while self._next_k < self.d:
            e = np.zeros(self.d)
            e[self._next_k] = 1.0
            self._next_k += 1
            try:
                row = unit_complement(self.basis, e)
            except DegenerateDirection:
                continue
            self._insert(row)
            return row
        raise DimensionExhausted(f"no direction orthogonal to the history is left in R^{self.d}")

    def _assign(self, l: int) -> np.ndarray:
        if l not in self.assigned:
            self.assigned[l] = self._fresh_row()
        return self.assigned[l]

    def _start_query(self, w) -> np.ndarray:
        if self.calls >= self.T:
            raise BudgetExceeded(f"adversary budget of {self.T} queries is spent")
        w = _check_len(w, self.d, "w").copy()
        self.queried_ws.append(w)
        self._insert(w)
        return w

    def _payoffs(self, w: np.ndarray) -> np.ndarray:
        aw = np.zeros(self.n)
        for j, row in self.assigned.items():
            aw[j] = row @ w
        return aw

    def one_sided(self, l, w):
        if not 0 <= l < self.n:
            raise IndexError(f"row index {l} out of range for {self.n} rows")
        w = self._start_query(w)
        row = self._assign(int(l)).copy()
        aw = self._payoffs(w)
        self.calls += 1
        self.log.append(QueryRecord(self.calls, Query.one_sided(l, w), Response(aw=aw, row=row)))
        return aw, row

    def supergradient_indexed(self, w):
        w = self._start_query(w)
        # unrevealed rows will be orthogonal to w, so their payoff is 0
        l = int(np.argmin(self._payoffs(w)))
        row = self._assign(l).copy()
        self.calls += 1
        self.log.append(QueryRecord(self.calls, Query.supergradient(w),
                                    Response(row=row, row_index=l)))
        return row, l

    def transcript(self, final_output) -> Transcript:
        kinds = {r.kind for r in self.log}
        kind = kinds.pop() if len(kinds) == 1 else OracleKind.ONE_SIDED
        return Transcript(kind, list(self.log), np.asarray(final_output, dtype=float),
                          None, {"T": self.T, "d": self.d})

    def finalize(self, w_final, transcript: Transcript | None = None,
                 tol_replay: float = 1e-9, tol_nonsep: float = 1e-12,
                 tol_witness: float = 1e-9) -> tuple[GameInstance, Certificate]:
        w_final = _check_len(w_final, self.d, "w_final").copy()
        self._insert(w_final)
        for l in range(self.n):
            self._assign(l)
        A = GameInstance(np.vstack([self.assigned[l] for l in range(self.n)]),
                         Geometry.L2_BALL, NormContract.UNIT_ROWS)
        if transcript is None:
            transcript = self.transcript(w_final)
        replay_err, replay_ok = replay_verify(A, transcript, tol_replay)
        norms = np.linalg.norm(A.entries, axis=1)
        witness = A.entries.sum(axis=0) / math.sqrt(self.n)
        wval, _ = min_payoff(A, witness)
        target = 1.0 / math.sqrt(self.n)
        out_val, _ = min_payoff(A, w_final)
        cert = Certificate(
            replay_max_err=replay_err, replay_pass=replay_ok,
            norm_stat=float(norms.max()),
            norm_pass=bool(np.all(np.abs(norms - 1.0) <= 1e-9)),
            witness_value=wval, witness_target=target,
            witness_pass=wval >= target - tol_witness,
            output_min_payoff=out_val, nonsep_pass=out_val <= tol_nonsep,
            geometry="onesided", T=self.T, n=self.n, d=self.d,
        )
        return A, cert


# -- two-sided ------------------------------------------------------------------

class TwoSidedAdversary(Oracle):
    """Answers two-sided queries from a lazily grown factor sum.

    Round ``t`` (1-based) receives ``(p_t, w_t)``, picks ``u_t`` orthogonal to
    ``u_1..u_{t-1}, w_1..w_t``, draws ``v_t = beta (I - M M^T) xi_t`` with ``M``
    spanning ``v_0..v_{t-1}, p_1..p_t``, and answers with
    ``A_t = sum_{j<=t} (v_{j-1} - v_j) u_j^T``.

    In L2 geometry ``u_t`` is the projection of the first standard basis
    vector that is not already in the span; in L1 geometry it is a projected
    Gaussian, which keeps its entries small.
    """

    def __init__(self, params: AdvParams, seed: int, debug: bool = False):
        super().__init__()
        self.params = params
        self.n, self.d, self.T = params.n, params.d, params.T
        self.seed = int(seed)
        self.debug = debug
        self.rng = np.random.Generator(np.random.Philox(self.seed))
        self.v0 = np.full(self.n, params.alpha)
        self.M, _ = basis_insert(OrthoBasis(self.n), self.v0)
        self.N = OrthoBasis(self.d)
        self.u_list: list[np.ndarray] = []
        self.v_list: list[np.ndarray] = []
        self.ws: list[np.ndarray] = []
        self.ps: list[np.ndarray] = []
        self.factors = LowRankFactors(self.n, self.d)
        self.log: list[QueryRecord] = []
        self.t = 0
        self.final_output: np.ndarray | None = None

    def config(self):
        out = super().config()
        out.update(self.params.as_dict())
        out["seed"] = self.seed
        return out

    def _insert_n(self, x):
        try:
            self.N, _ = basis_insert(self.N, x)
        except BasisFull as exc:
            raise DimensionExhausted(f"d = {self.d} is too small for T = {self.T}") from exc

    def _insert_m(self, x):
        try:
            self.M, _ = basis_insert(self.M, x)
        except BasisFull as exc:
            raise DimensionExhausted(f"n = {self.n} is too small for T = {self.T}") from exc

    def sample_u(self) -> np.ndarray:
        """Next unit vector orthogonal to the current span ``N``."""
        if self.N.full:
            raise DimensionExhausted("u-basis spans all of R^d")
        if self.params.geometry is AdvGeometry.L2:
            for k in range(self.d):
                e = np.zeros(self.d)
                e[k] = 1.0
                try:
                    return unit_complement(self.N, e)
                except DegenerateDirection:
                    continue
        else:
            for _ in range(MAX_RESAMPLES):
                try:
                    return unit_complement(self.N, self.rng.standard_normal(self.d))
                except DegenerateDirection:
                    continue
        raise DegenerateDirection("could not find a direction orthogonal to the history")

    def _sample_v(self) -> np.ndarray:
        for _ in range(MAX_RESAMPLES):
            xi = self.rng.standard_normal(self.n)
            v = self.params.beta * project_complement(self.M, xi)
            if np.linalg.norm(v) >= self.M.drop_tol * self.params.beta * max(1.0, np.linalg.norm(xi)):
                return v
        raise DegenerateDirection("projected Gaussian vanished repeatedly")

    def two_sided(self, p, w):
        if self.t >= self.T:
            raise BudgetExceeded(f"adversary budget of {self.T} queries is spent")
        p = _check_len(p, self.n, "p").copy()
        w = _check_len(w, self.d, "w").copy()
        self.ws.append(w)
        self.ps.append(p)
        self._insert_n(w)
        u = self.sample_u()
        self._insert_n(u)
        self._insert_m(p)
        v = self._sample_v()
        self._insert_m(v)
        v_prev = self.v_list[-1] if self.v_list else self.v0
        self.u_list.append(u)
        self.v_list.append(v)
        self.factors = self.factors.append(v_prev - v, u)
        self.t += 1
        aw = lowrank_matvec(self.factors, w)
        pta = lowrank_vecmat(self.factors, p)
        self.calls += 1
        self.log.append(QueryRecord(self.calls, Query.two_sided(p, w), Response(aw=aw, pta=pta)))
        if self.debug:
            err = self.orthogonality_error()
            if err > ORTHO_TOL:
                raise AssertionError(f"orthogonality invariant broken: {err!r}")
        return aw, pta

    def orthogonality_error(self) -> float:
        """Worst relative violation of the construction's orthogonality relations so far."""
        worst = 0.0
        V = [self.v0] + self.v_list
        for t in range(1, len(self.u_list) + 1):
            u, v = self.u_list[t - 1], V[t]
            worst = max(worst, abs(float(np.linalg.norm(u)) - 1.0))
            for other in self.u_list[: t - 1] + self.ws[:t]:
                nrm = float(np.linalg.norm(other))
                if nrm > 0:
                    worst = max(worst, abs(float(u @ other)) / nrm)
            vn = float(np.linalg.norm(v))
            for other in V[:t] + self.ps[:t]:
                nrm = float(np.linalg.norm(other))
                if nrm > 0 and vn > 0:
                    worst = max(worst, abs(float(v @ other)) / (nrm * vn))
        return worst

    def transcript(self) -> Transcript:
        return Transcript(OracleKind.TWO_SIDED, list(self.log), self.final_output,
                          self.seed, self.config())

    def truncated_factors(self) -> LowRankFactors:
        """The ``T``-term sum without the final ``v_T u_{T+1}^T`` term."""
        return self.factors if len(self.factors) <= self.T else LowRankFactors(
            self.n, self.d, self.factors.pairs[: self.T])

    def finalize(self, w_final, transcript: Transcript | None = None,
                 tol_replay: float = 1e-9, tol_nonsep: float = 1e-9,
                 tol_witness: float = 1e-9) -> tuple[GameInstance, LowRankFactors, Certificate]:
        if self.t != self.T:
            raise RuntimeError(f"finalize needs exactly T = {self.T} rounds, saw {self.t}")
        w_final = _check_len(w_final, self.d, "w_final").copy()
        self.final_output = w_final
        self._insert_n(w_final)
        u_last = self.sample_u()
        self._insert_n(u_last)
        self.u_list.append(u_last)
        partial = self.factors
        v_last = self.v_list[-1] if self.v_list else self.v0
        self.factors = self.factors.append(v_last, u_last)
        geometry = Geometry.L2_BALL if self.params.geometry is AdvGeometry.L2 else Geometry.L1_BALL
        A = GameInstance(self.factors.materialize(), geometry, NormContract.NONE)
        identity_err = float(np.max(np.abs(A.entries @ w_final - lowrank_matvec(partial, w_final))))
        if transcript is None:
            transcript = self.transcript()
        cert = certify(A, self, transcript, tol_replay, tol_nonsep, tol_witness,
                       identity_err=identity_err)
        return A, self.factors, cert


def certify(A: GameInstance, s: TwoSidedAdversary, t: Transcript, tol_replay: float = 1e-9,
            tol_nonsep: float = 1e-9, tol_witness: float = 1e-9,
            identity_err: float = 0.0) -> Certificate:
    """Check replay consistency, the norm contract, the witness value and non-separation.

    Failures are recorded on the certificate, never raised.
    """
    P = s.params
    M = A.entries
    replay_err, _ = replay_verify(A, t, tol_replay)
    replay_ok = replay_err <= tol_replay and identity_err <= tol_replay
    U = np.vstack(s.u_list)
    if P.geometry is AdvGeometry.L2:
        norm_stat = float(np.max(np.linalg.norm(M, axis=1)))
        witness = U.sum(axis=0) / math.sqrt(len(s.u_list))
        target = P.alpha / math.sqrt(len(s.u_list))
    else:
        norm_stat = float(np.max(np.abs(M)))
        l1_total = float(np.abs(U).sum())
        witness = U.sum(axis=0) / l1_total
        target = P.alpha / l1_total
    wval, _ = min_payoff(A, witness)
    if t.final_output is None:
        raise ValueError("transcript has no final output")
    out_val, _ = min_payoff(A, t.final_output)
    return Certificate(
        replay_max_err=replay_err, replay_pass=replay_ok,
        norm_stat=norm_stat, norm_pass=norm_stat <= 1.0,
        witness_value=wval, witness_target=target,
        witness_pass=wval >= target - tol_witness and target > 0,
        output_min_payoff=out_val, nonsep_pass=out_val <= tol_nonsep,
        geometry=P.geometry.value, T=P.T, n=P.n, d=P.d, seed=s.seed,
        delta=P.delta, alpha=P.alpha, beta=P.beta, output_identity_err=identity_err,
    )


def probe_nonseparation(s: TwoSidedAdversary, iterations: int = 200, eps: float = 0.01) -> float:
    """Search for a separator of the ``T``-term factor sum with smoothed AGD.

    Returns the best min payoff found over the unit ball; a positive value
    would falsify non-separation for this draw.  Reported, never gating.
    """
    from .oracles import DenseOracle
    from .solvers import SmoothingConfig, agd_smoothed

    B = s.truncated_factors().materialize()
    scale = float(np.max(np.linalg.norm(B, axis=1)))
    if scale == 0.0:
        return 0.0
    B = B / scale
    report = agd_smoothed(DenseOracle(B), iterations, SmoothingConfig.for_accuracy(eps, s.n))
    best = max(report.per_iteration_values) if report.per_iteration_values else 0.0
    return best * scale
