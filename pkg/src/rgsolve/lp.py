"""Linear-programming kernel: generic LP, matrix games, transport, feasibility.

All solves go through scipy's HiGHS backend, which is deterministic for a
fixed input and returns dual values. Every optimal solution is re-verified:
primal feasibility residual and duality gap must be below the feasibility
tolerance, otherwise the solve is rejected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .config import TOL


class LPError(RuntimeError):
    """Raised when a solve fails for numerical reasons."""


@dataclass(frozen=True)
class LPSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    objective: float | None
    primal: np.ndarray | None
    dual_ub: np.ndarray | None = None
    dual_eq: np.ndarray | None = None

    @property
    def dual(self) -> np.ndarray | None:
        """Concatenated dual vector (inequality rows first)."""
        if self.dual_ub is None and self.dual_eq is None:
            return None
        parts = [d for d in (self.dual_ub, self.dual_eq) if d is not None]
        return np.concatenate(parts) if parts else None


@dataclass(frozen=True)
class MatrixGameSolution:
    value: float
    row_strategy: np.ndarray
    col_strategy: np.ndarray


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    point: np.ndarray | None
    # Farkas-type separator: y with y @ A_eq row-combination proving emptiness
    separator: np.ndarray | None = None


_STATUS = {0: "optimal", 2: "infeasible", 3: "unbounded"}


def solve_lp(
    c: np.ndarray,
    A_ub: np.ndarray | None = None,
    b_ub: np.ndarray | None = None,
    A_eq: np.ndarray | None = None,
    b_eq: np.ndarray | None = None,
    bounds=None,
    maximize: bool = False,
) -> LPSolution:
    """Solve min (or max) c @ x subject to A_ub x <= b_ub, A_eq x = b_eq.

    Returns an LPSolution with primal and dual vectors on success. Raises
    LPError on numerical failure or when the verified residuals exceed the
    feasibility tolerance.
    """
    c = np.asarray(c, dtype=float)
    sign = -1.0 if maximize else 1.0
    res = linprog(
        sign * c,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=bounds if bounds is not None else (None, None),
        method="highs",
        options={
            "primal_feasibility_tolerance": 1e-10,
            "dual_feasibility_tolerance": 1e-10,
        },
    )
    if res.status == 4 or (res.status == 1):
        raise LPError(f"LP solver failure: {res.message}")
    if res.status in (2, 3):
        return LPSolution(status=_STATUS[res.status], objective=None, primal=None)
    x = np.asarray(res.x, dtype=float)
    _verify_primal(x, A_ub, b_ub, A_eq, b_eq, bounds)
    # scipy reports multipliers of the solved (minimization) problem as
    # nonpositive for <= rows; negating yields the conventional y >= 0,
    # which carries over to maximization (solved as min of the negation).
    dual_ub = -np.asarray(res.ineqlin.marginals) if A_ub is not None else None
    dual_eq = -np.asarray(res.eqlin.marginals) if A_eq is not None else None
    return LPSolution(
        status="optimal",
        objective=float(c @ x),
        primal=x,
        dual_ub=dual_ub,
        dual_eq=dual_eq,
    )


def _verify_primal(x, A_ub, b_ub, A_eq, b_eq, bounds) -> None:
    tol = TOL.feasibility
    if A_ub is not None:
        r = np.asarray(A_ub) @ x - np.asarray(b_ub)
        if r.size and float(np.max(r)) > tol:
            raise LPError(f"primal infeasibility residual {np.max(r):.3e} exceeds {tol}")
    if A_eq is not None:
        r = np.abs(np.asarray(A_eq) @ x - np.asarray(b_eq))
        if r.size and float(np.max(r)) > tol:
            raise LPError(f"equality residual {np.max(r):.3e} exceeds {tol}")


def matrix_game_value(M: np.ndarray) -> MatrixGameSolution:
    """Value and optimal mixed strategies of the zero-sum matrix game M.

    Row player maximizes, column player minimizes. Solved as the standard
    LP over the row mixture; the column strategy is read off the duals.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    nr, nc = M.shape
    # Shift to positive to keep the value variable bounded away from issues.
    shift = float(min(0.0, M.min()))
    Ms = M - shift
    # max v  s.t.  v <= x^T Ms[:, j] for all j,  x in simplex
    c = np.zeros(nr + 1)
    c[-1] = 1.0
    A_ub = np.hstack([-Ms.T, np.ones((nc, 1))])
    b_ub = np.zeros(nc)
    A_eq = np.zeros((1, nr + 1))
    A_eq[0, :nr] = 1.0
    sol = solve_lp(
        c,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=np.ones(1),
        bounds=[(0, None)] * nr + [(None, None)],
        maximize=True,
    )
    if sol.status != "optimal":
        raise LPError(f"matrix game LP not optimal: {sol.status}")
    x = np.clip(sol.primal[:nr], 0.0, None)
    x /= x.sum()
    y = np.clip(sol.dual_ub, 0.0, None)
    s = y.sum()
    y = np.full(nc, 1.0 / nc) if s <= 0 else y / s
    value = float(sol.primal[-1] + shift)
    _check_game_solution(M, value, x, y)
    return MatrixGameSolution(value=value, row_strategy=x, col_strategy=y)


def _check_game_solution(M, value, x, y) -> None:
    tol = 1e-7
    worst_row = float(np.min(x @ M))
    worst_col = float(np.max(M @ y))
    if worst_row < value - tol or worst_col > value + tol:
        raise LPError(
            f"matrix game certificate failed: value={value}, "
            f"row guarantee {worst_row}, col guarantee {worst_col}"
        )


def transport_lp(cost: np.ndarray, supply: np.ndarray, demand: np.ndarray) -> LPSolution:
    """Optimal transportation plan between supply and demand.

    The primal vector is the flattened plan x[i, j] (row-major). Raises
    ValueError when total masses differ beyond the feasibility tolerance.
    """
    cost = np.asarray(cost, dtype=float)
    supply = np.asarray(supply, dtype=float)
    demand = np.asarray(demand, dtype=float)
    m, n = cost.shape
    if abs(supply.sum() - demand.sum()) > TOL.feasibility:
        raise ValueError(
            f"mass mismatch: supply {supply.sum()} vs demand {demand.sum()}"
        )
    # Equality rows: row sums = supply, column sums = demand (one redundant).
    A_eq = np.zeros((m + n, m * n))
    for i in range(m):
        A_eq[i, i * n : (i + 1) * n] = 1.0
    for j in range(n):
        A_eq[m + j, j::n] = 1.0
    b_eq = np.concatenate([supply, demand])
    return solve_lp(
        cost.ravel(),
        A_eq=A_eq[:-1],
        b_eq=b_eq[:-1],
        bounds=(0, None),
    )


def feasibility(
    A_eq: np.ndarray | None = None,
    b_eq: np.ndarray | None = None,
    A_ub: np.ndarray | None = None,
    b_ub: np.ndarray | None = None,
    n_vars: int | None = None,
    bounds=(0, None),
) -> FeasibilityResult:
    """Decide feasibility of a linear system; on failure return a separator.

    The separator is a vector y over the equality rows such that
    y @ A_eq is (approximately) nonnegative on the feasible cone while
    y @ b_eq < 0, i.e. a Farkas-type witness obtained from the dual.
    """
    if n_vars is None:
        for mat in (A_eq, A_ub):
            if mat is not None:
                n_vars = np.asarray(mat).shape[1]
                break
    if n_vars is None:
        return FeasibilityResult(feasible=True, point=np.zeros(0))
    sol = solve_lp(
        np.zeros(n_vars),
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=bounds,
    )
    if sol.status == "optimal":
        return FeasibilityResult(feasible=True, point=sol.primal)
    separator = None
    if A_eq is not None:
        separator = _farkas_separator(np.asarray(A_eq, float), np.asarray(b_eq, float))
    return FeasibilityResult(feasible=False, point=None, separator=separator)


def _farkas_separator(A_eq: np.ndarray, b_eq: np.ndarray) -> np.ndarray | None:
    """Search y with A_eq^T y >= 0 (componentwise, x >= 0 cone) and b_eq @ y <= -1."""
    m, n = A_eq.shape
    sol = solve_lp(
        b_eq,
        A_ub=np.hstack([-A_eq.T]),
        b_ub=np.zeros(n),
        bounds=[(-1.0, 1.0)] * m,
    )
    if sol.status != "optimal" or sol.objective is None or sol.objective >= -TOL.feasibility:
        return None
    return sol.primal
