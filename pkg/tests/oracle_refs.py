"""Independent reference computations used by the tests (scipy, not the package)."""
import numpy as np
from scipy.optimize import linprog, minimize


def _dense(A) -> np.ndarray:
    return np.asarray(getattr(A, "entries", A), dtype=float)


def l2_margin(A: np.ndarray) -> float:
    """``max_{|w|_2 <= 1} min_l (Aw)_l`` by SLSQP on ``(w, t)``."""
    A = _dense(A)
    n, d = A.shape
    x0 = np.zeros(d + 1)
    cons = [
        {"type": "ineq", "fun": lambda x: A @ x[:d] - x[d], "jac": lambda x: np.hstack([A, -np.ones((n, 1))])},
        {"type": "ineq", "fun": lambda x: 1.0 - x[:d] @ x[:d], "jac": lambda x: np.r_[-2 * x[:d], 0.0]},
    ]
    res = minimize(lambda x: -x[d], x0, jac=lambda x: np.r_[np.zeros(d), -1.0],
                   constraints=cons, method="SLSQP", options={"ftol": 1e-12, "maxiter": 500})
    return float(-res.fun)


def simplex_game_value(A: np.ndarray) -> float:
    """``max_{w in simplex} min_l (Aw)_l`` by linear programming."""
    A = _dense(A)
    n, d = A.shape
    c = np.r_[np.zeros(d), -1.0]
    A_ub = np.hstack([-A, np.ones((n, 1))])
    A_eq = np.r_[np.ones(d), 0.0][None, :]
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(n), A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * d + [(None, None)], method="highs")
    return float(-res.fun)


def l1_game_value(A: np.ndarray) -> float:
    """``max_{|w|_1 <= 1} min_l (Aw)_l`` by linear programming on ``w = a - b``."""
    A = _dense(A)
    n, d = A.shape
    c = np.r_[np.zeros(2 * d), -1.0]
    A_ub = np.vstack([np.hstack([-A, A, np.ones((n, 1))]), np.r_[np.ones(2 * d), 0.0][None, :]])
    b_ub = np.r_[np.zeros(n), 1.0]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=[(0, None)] * (2 * d) + [(None, None)], method="highs")
    return float(-res.fun)
