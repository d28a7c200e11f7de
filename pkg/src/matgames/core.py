"""Dense and low-rank linear algebra shared by the oracles, solvers and adversaries.

Row indices are 0-based throughout the package.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

ROW_NORM_SLACK = 1e-9
ENTRY_SLACK = 1e-12
SIMPLEX_TOL = 1e-9
DEFAULT_DROP_TOL = 1e-10


class DimensionMismatch(ValueError):
    pass


class DegenerateDirection(ValueError):
    """Projected residual too small to normalise; the caller must pick another vector."""


class BasisFull(ValueError):
    pass


class InfeasibleInput(ValueError):
    pass


class Geometry(str, enum.Enum):
    L2_BALL = "l2_ball"
    L1_BALL = "l1_ball"
    SIMPLEX = "simplex"


class NormContract(str, enum.Enum):
    UNIT_ROWS = "unit_rows"
    UNIT_ENTRIES = "unit_entries"
    NONE = "none"


def _frozen(x) -> np.ndarray:
    arr = np.array(x, dtype=np.float64, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class GameInstance:
    """The payoff matrix of ``max_w min_p p^T A w`` plus the domain of ``w``."""

    entries: np.ndarray
    w_geometry: Geometry = Geometry.L2_BALL
    norm_contract: NormContract = NormContract.NONE

    def __post_init__(self):
        A = _frozen(self.entries)
        if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
            raise DimensionMismatch(f"expected a non-empty 2-d matrix, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise ValueError("matrix entries must be finite")
        object.__setattr__(self, "entries", A)
        object.__setattr__(self, "w_geometry", Geometry(self.w_geometry))
        object.__setattr__(self, "norm_contract", NormContract(self.norm_contract))
        if self.norm_contract is NormContract.UNIT_ROWS:
            worst = float(np.max(np.linalg.norm(A, axis=1)))
            if worst > 1 + ROW_NORM_SLACK:
                raise ValueError(f"row norm {worst!r} violates the unit-rows contract")
        elif self.norm_contract is NormContract.UNIT_ENTRIES:
            worst = float(np.max(np.abs(A)))
            if worst > 1 + ENTRY_SLACK:
                raise ValueError(f"entry magnitude {worst!r} violates the unit-entries contract")

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def d(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


def as_matrix(A: GameInstance | np.ndarray) -> np.ndarray:
    if isinstance(A, GameInstance):
        return A.entries
    return np.asarray(A, dtype=np.float64)


def _check_len(x: np.ndarray, expected: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != expected:
        raise DimensionMismatch(f"{what} must have length {expected}, got shape {x.shape}")
    return x


def min_payoff(A: GameInstance | np.ndarray, w) -> tuple[float, int]:
    """Return ``(min_l (Aw)_l, l)`` with ties broken towards the lowest row index."""
    M = as_matrix(A)
    w = _check_len(w, M.shape[1], "w")
    payoffs = M @ w
    l = int(np.argmin(payoffs))  # argmin returns the first minimiser
    return float(payoffs[l]), l


@dataclass(frozen=True)
class LowRankFactors:
    """``A = sum_j left_j right_j^T`` kept in factored form."""

    n: int
    d: int
    pairs: tuple[tuple[np.ndarray, np.ndarray], ...] = ()

    def __post_init__(self):
        checked = []
        for left, right in self.pairs:
            left = _check_len(left, self.n, "left factor")
            right = _check_len(right, self.d, "right factor")
            checked.append((_frozen(left), _frozen(right)))
        object.__setattr__(self, "pairs", tuple(checked))

    def append(self, left, right) -> "LowRankFactors":
        return LowRankFactors(self.n, self.d, self.pairs + ((left, right),))

    def __len__(self) -> int:
        return len(self.pairs)

    @cached_property
    def _stacked(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.pairs:
            return np.zeros((self.n, 0)), np.zeros((self.d, 0))
        L = np.column_stack([p[0] for p in self.pairs])
        R = np.column_stack([p[1] for p in self.pairs])
        return L, R

    def materialize(self) -> np.ndarray:
        L, R = self._stacked
        return L @ R.T


def lowrank_matvec(F: LowRankFactors, w) -> np.ndarray:
    """``A w`` without forming ``A``."""
    w = _check_len(w, F.d, "w")
    L, R = F._stacked
    return L @ (R.T @ w)


def lowrank_vecmat(F: LowRankFactors, p) -> np.ndarray:
    """``p^T A`` without forming ``A``."""
    p = _check_len(p, F.n, "p")
    L, R = F._stacked
    return R @ (L.T @ p)


@dataclass(frozen=True)
class OrthoBasis:
    """An orthonormal set of vectors in R^dim, grown one vector at a time."""

    dim: int
    vectors: tuple[np.ndarray, ...] = ()
    drop_tol: float = DEFAULT_DROP_TOL

    def __len__(self) -> int:
        return len(self.vectors)

    @property
    def full(self) -> bool:
        return len(self.vectors) >= self.dim

    @cached_property
    def matrix(self) -> np.ndarray:
        if not self.vectors:
            return np.zeros((self.dim, 0))
        return np.column_stack(self.vectors)


def _residual(B: OrthoBasis, x: np.ndarray) -> np.ndarray:
    if not B.vectors:
        return x.copy()
    Q = B.matrix
    r = x - Q @ (Q.T @ x)
    # second pass restores orthogonality lost to cancellation
    return r - Q @ (Q.T @ r)


def project_complement(B: OrthoBasis, x) -> np.ndarray:
    """``(I - Q Q^T) x`` for the basis matrix ``Q``, computed with two Gram-Schmidt passes."""
    x = _check_len(x, B.dim, "x")
    return _residual(B, x)


def basis_insert(B: OrthoBasis, x) -> tuple[OrthoBasis, bool]:
    """Extend ``B`` so it also spans ``x``. Returns the new basis and whether it grew."""
    x = _check_len(x, B.dim, "x")
    r = _residual(B, x)
    rnorm = float(np.linalg.norm(r))
    if rnorm < B.drop_tol * max(1.0, float(np.linalg.norm(x))):
        return B, False
    if B.full:
        raise BasisFull(f"basis already spans R^{B.dim}")
    return OrthoBasis(B.dim, B.vectors + (_frozen(r / rnorm),), B.drop_tol), True


def unit_complement(B: OrthoBasis, x) -> np.ndarray:
    """Unit vector along the part of ``x`` orthogonal to ``B``."""
    x = _check_len(x, B.dim, "x")
    r = _residual(B, x)
    rnorm = float(np.linalg.norm(r))
    if rnorm < B.drop_tol * max(1.0, float(np.linalg.norm(x))):
        raise DegenerateDirection("vector lies (numerically) inside the basis span")
    return r / rnorm


def check_simplex(x, tol: float = SIMPLEX_TOL, what: str = "vector") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < -tol):
        raise InfeasibleInput(f"{what} has negative mass {float(x.min())!r}")
    if abs(float(x.sum()) - 1.0) > tol:
        raise InfeasibleInput(f"{what} sums to {float(x.sum())!r}, not 1")
    return x


def duality_gap(A: GameInstance | np.ndarray, w, p) -> float:
    """``max_i (p^T A)_i - min_l (A w)_l`` for a pair of mixed strategies."""
    M = as_matrix(A)
    w = check_simplex(_check_len(w, M.shape[1], "w"), what="w")
    p = check_simplex(_check_len(p, M.shape[0], "p"), what="p")
    return float(np.max(p @ M) - np.min(M @ w))


def tridiag_quadratic_matrix(T: int) -> np.ndarray:
    """Symmetric matrix whose quadratic form is ``sum_j (x_j - x_{j+1})^2 + x_T^2``."""
    M = 2.0 * np.eye(T) - np.eye(T, k=1) - np.eye(T, k=-1)
    M[0, 0] = 1.0
    return M


def tridiag_psd_margin(T: int, delta: float) -> float:
    """Smallest eigenvalue of ``M - delta^2 e_1 e_1^T``.

    It is nonnegative exactly when ``delta <= 1/sqrt(T)``.
    """
    if T < 2:
        raise ValueError("T must be at least 2")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    M = tridiag_quadratic_matrix(T)
    M[0, 0] -= delta * delta
    return float(np.linalg.eigvalsh(M)[0])


# -- matrix text format ------------------------------------------------------

def format_matrix(A: GameInstance | np.ndarray) -> str:
    M = as_matrix(A)
    lines = [f"{M.shape[0]} {M.shape[1]}"]
    lines.extend(" ".join(f"{x:.17g}" for x in row) for row in M)
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> np.ndarray:
    rows = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
    if not rows or len(rows[0]) != 2:
        raise ValueError("first line must be 'n d'")
    n, d = int(rows[0][0]), int(rows[0][1])
    body = rows[1:]
    if len(body) != n or any(len(r) != d for r in body):
        raise DimensionMismatch(f"header says {n}x{d} but body does not match")
    return np.array([[float(x) for x in r] for r in body], dtype=np.float64)


def dump_matrix(A: GameInstance | np.ndarray, path: str | Path) -> None:
    Path(path).write_text(format_matrix(A))


def load_matrix(path: str | Path, w_geometry: Geometry = Geometry.L2_BALL,
                norm_contract: NormContract = NormContract.NONE) -> GameInstance:
    return GameInstance(parse_matrix(Path(path).read_text()), w_geometry, norm_contract)
