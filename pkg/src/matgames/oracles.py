"""Oracle access to a matrix game: queries, transcripts, the interaction loop and replay."""
from __future__ import annotations

import enum
import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .core import DimensionMismatch, GameInstance, _check_len, as_matrix


class OracleKind(str, enum.Enum):
    ONE_SIDED = "one_sided"
    SUPERGRADIENT = "supergradient"
    TWO_SIDED = "two_sided"


@dataclass(frozen=True, eq=False)
class Query:
    kind: OracleKind
    w: np.ndarray
    l: int | None = None
    p: np.ndarray | None = None

    @classmethod
    def one_sided(cls, l: int, w) -> "Query":
        return cls(OracleKind.ONE_SIDED, np.asarray(w, dtype=float), l=int(l))

    @classmethod
    def supergradient(cls, w) -> "Query":
        return cls(OracleKind.SUPERGRADIENT, np.asarray(w, dtype=float))

    @classmethod
    def two_sided(cls, p, w) -> "Query":
        return cls(OracleKind.TWO_SIDED, np.asarray(w, dtype=float), p=np.asarray(p, dtype=float))


@dataclass(frozen=True, eq=False)
class Response:
    """Oracle answer. Which fields are set depends on the query kind.

    ``row_index`` is set for supergradient answers so replay can check the
    returned row against the matrix without re-deciding ties.
    """

    aw: np.ndarray | None = None
    row: np.ndarray | None = None
    pta: np.ndarray | None = None
    row_index: int | None = None


@dataclass(frozen=True, eq=False)
class QueryRecord:
    ordinal: int
    query: Query
    response: Response

    @property
    def kind(self) -> OracleKind:
        return self.query.kind


@dataclass(eq=False)
class Transcript:
    kind: OracleKind
    records: list[QueryRecord] = field(default_factory=list)
    final_output: np.ndarray | None = None
    seed: int | None = None
    params: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def to_dict(self) -> dict:
        def vec(x):
            return None if x is None else [float(v) for v in x]

        recs = []
        for r in self.records:
            q, a = r.query, r.response
            recs.append({
                "ordinal": r.ordinal,
                "l": q.l, "w": vec(q.w), "p": vec(q.p),
                "aw": vec(a.aw), "row": vec(a.row), "pta": vec(a.pta),
                "row_index": a.row_index,
            })
        return {
            "kind": self.kind.value,
            "records": recs,
            "final_output": vec(self.final_output),
            "seed": self.seed,
            "params": self.params,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Transcript":
        def arr(x):
            return None if x is None else np.array(x, dtype=np.float64)

        kind = OracleKind(data["kind"])
        records = []
        for r in data["records"]:
            q = Query(kind, arr(r["w"]), l=r.get("l"), p=arr(r.get("p")))
            a = Response(aw=arr(r.get("aw")), row=arr(r.get("row")), pta=arr(r.get("pta")),
                         row_index=r.get("row_index"))
            records.append(QueryRecord(r["ordinal"], q, a))
        return cls(kind, records, arr(data.get("final_output")), data.get("seed"),
                   dict(data.get("params") or {}))

    def dumps(self) -> str:
        # float repr round-trips exactly
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "Transcript":
        return cls.from_dict(json.loads(text))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path: str | Path) -> "Transcript":
        return cls.loads(Path(path).read_text())


# -- pure oracle functions on a dense matrix ----------------------------------

def _row_index(M: np.ndarray, l: int) -> int:
    if not 0 <= l < M.shape[0]:
        raise IndexError(f"row index {l} out of range for {M.shape[0]} rows")
    return int(l)


def o1_query(A: GameInstance | np.ndarray, l: int, w) -> tuple[np.ndarray, np.ndarray]:
    """One-sided oracle: ``(A w, A_l)``."""
    M = as_matrix(A)
    l = _row_index(M, l)
    w = _check_len(w, M.shape[1], "w")
    return M @ w, M[l].copy()


def osg_query_indexed(A: GameInstance | np.ndarray, w) -> tuple[np.ndarray, int]:
    M = as_matrix(A)
    w = _check_len(w, M.shape[1], "w")
    l = int(np.argmin(M @ w))
    return M[l].copy(), l


def osg_query(A: GameInstance | np.ndarray, w) -> np.ndarray:
    """Supergradient oracle: the lowest-index row minimising ``(A w)_l``."""
    return osg_query_indexed(A, w)[0]


def o2_query(A: GameInstance | np.ndarray, p, w) -> tuple[np.ndarray, np.ndarray]:
    """Two-sided oracle: ``(A w, p^T A)``."""
    M = as_matrix(A)
    p = _check_len(p, M.shape[0], "p")
    w = _check_len(w, M.shape[1], "w")
    return M @ w, p @ M


# -- oracle objects -----------------------------------------------------------

class Oracle(ABC):
    """Anything that answers queries about a hidden ``n x d`` matrix.

    Subclasses implement the kinds they support; ``calls`` counts one unit per
    answered query regardless of kind.
    """

    n: int
    d: int
    seed: int | None = None

    def __init__(self):
        self.calls = 0

    def one_sided(self, l: int, w) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError(f"{type(self).__name__} has no one-sided oracle")

    def supergradient(self, w) -> np.ndarray:
        return self.supergradient_indexed(w)[0]

    def supergradient_indexed(self, w) -> tuple[np.ndarray, int]:
        raise NotImplementedError(f"{type(self).__name__} has no supergradient oracle")

    def two_sided(self, p, w) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError(f"{type(self).__name__} has no two-sided oracle")

    def answer(self, query: Query) -> Response:
        if query.kind is OracleKind.ONE_SIDED:
            aw, row = self.one_sided(query.l, query.w)
            return Response(aw=aw, row=row)
        if query.kind is OracleKind.SUPERGRADIENT:
            row, idx = self.supergradient_indexed(query.w)
            return Response(row=row, row_index=idx)
        aw, pta = self.two_sided(query.p, query.w)
        return Response(aw=aw, pta=pta)

    def config(self) -> dict[str, Any]:
        return {"oracle": type(self).__name__, "n": self.n, "d": self.d}


class DenseOracle(Oracle):
    """All three oracles backed by a fixed dense matrix."""

    def __init__(self, A: GameInstance | np.ndarray):
        super().__init__()
        self.instance = A if isinstance(A, GameInstance) else GameInstance(A)
        self.n, self.d = self.instance.shape

    def one_sided(self, l, w):
        out = o1_query(self.instance, l, w)
        self.calls += 1
        return out

    def supergradient_indexed(self, w):
        out = osg_query_indexed(self.instance, w)
        self.calls += 1
        return out

    def two_sided(self, p, w):
        out = o2_query(self.instance, p, w)
        self.calls += 1
        return out


# -- algorithms ---------------------------------------------------------------

class Algorithm(ABC):
    """A deterministic oracle algorithm written as a small state machine.

    Subclasses implement ``reset``, ``propose``, ``absorb`` and ``output``.
    ``next_query``/``final_output`` expose it as a function of the response
    history: the history is fed incrementally when it extends what was seen,
    and replayed from scratch otherwise.
    """

    kind: OracleKind

    def __init__(self):
        self._seen: list[Response] = []
        self._pending: Query | None = None

    @abstractmethod
    def reset(self) -> None:
        ...

    @abstractmethod
    def _propose(self) -> Query:
        ...

    @abstractmethod
    def _absorb(self, query: Query, response: Response) -> None:
        ...

    @abstractmethod
    def output(self) -> np.ndarray:
        ...

    def propose(self) -> Query:
        if self._pending is None:
            self._pending = self._propose()
        return self._pending

    def absorb(self, response: Response) -> None:
        query = self.propose()
        self._pending = None
        self._absorb(query, response)
        self._seen.append(response)

    def restart(self) -> None:
        self._seen = []
        self._pending = None
        self.reset()

    def _sync(self, history: Sequence[Response]) -> None:
        k = len(self._seen)
        if k > len(history) or any(a is not b for a, b in zip(self._seen, history)):
            self.restart()
            k = 0
        for resp in history[k:]:
            self.absorb(resp)

    def next_query(self, history: Sequence[Response]) -> Query:
        self._sync(history)
        return self.propose()

    def final_output(self, history: Sequence[Response]) -> np.ndarray:
        self._sync(history)
        return np.array(self.output(), dtype=np.float64)

    def params(self) -> dict[str, Any]:
        return {"algorithm": type(self).__name__}


def drive_interaction(alg: Algorithm, oracle: Oracle, T: int) -> Transcript:
    """Run ``alg`` against ``oracle`` for exactly ``T`` queries.

    If the oracle raises, the partial transcript is attached to the exception
    as ``exc.transcript``.
    """
    if T < 0:
        raise ValueError("T must be nonnegative")
    alg.restart()
    params = dict(oracle.config())
    params.update(alg.params())
    params["T"] = T
    transcript = Transcript(alg.kind, seed=getattr(oracle, "seed", None), params=params)
    history: list[Response] = []
    for t in range(1, T + 1):
        query = alg.next_query(history)
        if query.kind is not alg.kind:
            raise ValueError(f"algorithm issued a {query.kind.value} query, declared {alg.kind.value}")
        try:
            response = oracle.answer(query)
        except Exception as exc:
            exc.transcript = transcript
            raise
        transcript.records.append(QueryRecord(t, query, response))
        history.append(response)
    transcript.final_output = alg.final_output(history)
    return transcript


# -- replay -------------------------------------------------------------------

def _inf(x, y) -> float:
    if x is None or y is None:
        raise ValueError("record is missing a response component")
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise DimensionMismatch(f"recorded shape {x.shape} vs recomputed {y.shape}")
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(x - y)))


def record_error(A: GameInstance | np.ndarray, record: QueryRecord) -> float:
    """Largest deviation between a recorded response and the true oracle on ``A``."""
    M = as_matrix(A)
    q, r = record.query, record.response
    if q.kind is OracleKind.ONE_SIDED:
        aw, row = o1_query(M, q.l, q.w)
        return max(_inf(r.aw, aw), _inf(r.row, row))
    if q.kind is OracleKind.TWO_SIDED:
        aw, pta = o2_query(M, q.p, q.w)
        return max(_inf(r.aw, aw), _inf(r.pta, pta))
    payoffs = M @ _check_len(q.w, M.shape[1], "w")
    if r.row_index is None:
        # no index recorded: require an exact match with the lowest-index argmin
        return _inf(r.row, M[int(np.argmin(payoffs))])
    idx = _row_index(M, r.row_index)
    # the recorded row must be that row of A and must attain the minimum payoff
    return max(_inf(r.row, M[idx]), float(payoffs[idx] - payoffs.min()))


def replay_verify(A: GameInstance | np.ndarray, transcript: Transcript,
                  tol: float = 1e-9) -> tuple[float, bool]:
    """Re-issue every recorded query against ``A``; return ``(max_err, max_err <= tol)``."""
    M = as_matrix(A)
    max_err = 0.0
    for rec in transcript.records:
        if rec.kind is not transcript.kind:
            raise ValueError("transcript mixes oracle kinds")
        max_err = max(max_err, record_error(M, rec))
    if transcript.final_output is not None:
        _check_len(transcript.final_output, M.shape[1], "final_output")
    return max_err, max_err <= tol
