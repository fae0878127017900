"""One-stage operators of the belief game.

The stage problem at belief p blends the guaranteed stage payoff (weight
alpha) with a continuation functional of the belief transition. Against a
continuation represented by certified piecewise-linear data both bounds
are exact linear programs:

* lower: the continuation of each posterior atom is replaced by its best
  barycentric combination of grid lower values; jointly maximizing over
  the stacked action and the combinations is one LP whose optimizer is a
  playable action (so the optimum is a true guarantee);
* upper: the continuation is replaced by a concave piecewise-linear
  majorant; by positive homogeneity its contribution through each signal
  column is again linear, and the resulting minimax is one LP whose duals
  on the payoff rows yield the minimizing opponent mixture.

For black-box continuations, ``stage_solve`` falls back to a coarse
search over the product of action simplices with local refinement; its
result is a guaranteed lower bound with a heuristic gap hint.
"""

from __future__ import annotations

import itertools
import weakref
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from ..game_model import AuxGame, auxiliary_game, RepeatedGameSpec
from ..lp import LPError, matrix_game_value, solve_lp
from .grid import Pieces, SimplexGrid


def _payoff_rows(aux: AuxGame, p: np.ndarray, n_vars: int, z_col: int):
    """Rows encoding z <= expected payoff against each pure opposing action."""
    K, I, J = aux.nK, aux.nI, aux.nJ
    coeff = np.einsum("k,kij->jki", p, aux.payoff).reshape(J, K * I)
    rows = np.zeros((J, n_vars))
    rows[:, : K * I] = -coeff
    rows[:, z_col] = 1.0
    return rows


def _simplex_rows(K: int, I: int, n_vars: int):
    A = np.zeros((K, n_vars))
    for k in range(K):
        A[k, k * I : (k + 1) * I] = 1.0
    return A


def stage_lower_lp(
    aux: AuxGame,
    p: np.ndarray,
    alpha: float,
    grid: SimplexGrid,
    vlow: np.ndarray,
) -> tuple[float, np.ndarray]:
    """Certified lower Shapley step; returns (value, maximizing stacked action)."""
    K, I, J, D = aux.nK, aux.nI, aux.nJ, aux.nD
    G = grid.size
    n = K * I + 1 + D * G
    z_col = K * I
    c = np.zeros(n)
    c[z_col] = alpha
    for d in range(D):
        c[z_col + 1 + d * G : z_col + 1 + (d + 1) * G] = (1.0 - alpha) * vlow
    A_ub = _payoff_rows(aux, p, n, z_col)
    # mass-transport rows: sum_g mu[d,g] * g[kap] = column(d)[kap], linear in a
    col_coeff = np.einsum("k,kind->ndki", p, aux.qbar).reshape(K * D, K * I)
    A_eq = np.zeros((K + D * K, n))
    b_eq = np.zeros(K + D * K)
    A_eq[:K] = _simplex_rows(K, I, n)
    b_eq[:K] = 1.0
    for d in range(D):
        for kap in range(K):
            row = K + d * K + kap
            A_eq[row, z_col + 1 + d * G : z_col + 1 + (d + 1) * G] = grid.points[:, kap]
            A_eq[row, : K * I] = -col_coeff[kap * D + d]
    bounds = [(0, None)] * (K * I) + [(0, 1)] + [(0, None)] * (D * G)
    sol = solve_lp(c, A_ub=A_ub, b_ub=np.zeros(J), A_eq=A_eq, b_eq=b_eq, bounds=bounds, maximize=True)
    if sol.status != "optimal":
        raise LPError(f"lower stage LP ended with status {sol.status}")
    a = _clean_stacked(sol.primal[: K * I].reshape(K, I))
    return float(sol.objective), a


def stage_upper_lp(
    aux: AuxGame,
    p: np.ndarray,
    alpha: float,
    pieces: Pieces,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Certified upper Shapley step against a concave PWL continuation majorant.

    Returns (value, maximizing stacked action of the relaxed game, opponent
    mixture read from the payoff-row duals).
    """
    K, I, J, D = aux.nK, aux.nI, aux.nJ, aux.nD
    n = K * I + 1 + D
    z_col = K * I
    c = np.zeros(n)
    c[z_col] = alpha
    c[z_col + 1 :] = 1.0 - alpha
    rows = [_payoff_rows(aux, p, n, z_col)]
    rhs = [np.zeros(J)]
    # t_d <= sum_kap (c_m + s_m[kap]) * column(d)[kap] for every piece m
    col_coeff = np.einsum("k,kind->dnki", p, aux.qbar)  # (D, K, K, I)
    for d in range(D):
        for (cm, sm) in pieces:
            row = np.zeros(n)
            row[z_col + 1 + d] = 1.0
            row[: K * I] = -np.einsum("n,nki->ki", cm + sm, col_coeff[d]).reshape(-1)
            rows.append(row[None, :])
            rhs.append(np.zeros(1))
    A_ub = np.vstack(rows)
    b_ub = np.concatenate(rhs)
    A_eq = _simplex_rows(K, I, n)
    bounds = [(0, None)] * (K * I) + [(0, 1)] + [(None, None)] * D
    sol = solve_lp(
        c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=np.ones(K), bounds=bounds, maximize=True
    )
    if sol.status != "optimal":
        raise LPError(f"upper stage LP ended with status {sol.status}")
    a = _clean_stacked(sol.primal[: K * I].reshape(K, I))
    b = _dual_mixture(sol.dual_ub[: aux.nJ], aux.nJ, alpha)
    return float(sol.objective), a, b


_one_shot_memo: "weakref.WeakKeyDictionary[AuxGame, dict]" = weakref.WeakKeyDictionary()


def one_shot_lp(aux: AuxGame, p: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Exact value of the one-stage informed game at belief p (memoized)."""
    store = _one_shot_memo.setdefault(aux, {})
    key = np.asarray(p, float).tobytes()
    if key not in store:
        zero_pieces: Pieces = [(0.0, np.zeros(aux.nK))]
        store[key] = stage_upper_lp(aux, p, 1.0, zero_pieces)
    return store[key]


def _clean_stacked(a: np.ndarray) -> np.ndarray:
    a = np.clip(a, 0.0, None)
    s = a.sum(axis=1, keepdims=True)
    s[s <= 0] = 1.0
    out = a / s
    out[a.sum(axis=1) <= 0] = 1.0 / a.shape[1]
    return out


def _dual_mixture(duals: np.ndarray, nJ: int, alpha: float) -> np.ndarray:
    if alpha <= 0.0:
        return np.full(nJ, 1.0 / nJ)
    y = np.clip(np.asarray(duals, float), 0.0, None)
    s = y.sum()
    return np.full(nJ, 1.0 / nJ) if s <= 0 else y / s


# ---------------------------------------------------------------------------
# Black-box stage solve: coarse product-simplex grid + local refinement
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StageSolution:
    value: float
    action: np.ndarray  # stacked mixed action
    opponent: np.ndarray  # mixture over opposing pure actions
    gap_hint: float  # heuristic optimality-gap indicator, not a certificate


def _simplex_lattice(dim: int, resolution: int) -> np.ndarray:
    return SimplexGrid.create(dim, resolution).points


def stage_solve(
    game: AuxGame | RepeatedGameSpec,
    p: np.ndarray,
    alpha: float,
    continuation,
    action_resolution: int = 4,
    refine_iters: int = 200,
) -> StageSolution:
    """Maximize alpha * (guaranteed payoff) + (1 - alpha) * continuation
    of the belief transition, over stacked mixed actions.

    ``continuation`` maps a BeliefMeasure to a real number and is treated
    as a black box; the returned value is the best found and is a valid
    guarantee whenever the continuation is itself a lower bound.
    """
    aux = game if isinstance(game, AuxGame) else auxiliary_game(game)
    p = np.asarray(p, dtype=float)
    K, I, J = aux.nK, aux.nI, aux.nJ

    def objective(a: np.ndarray) -> float:
        val = alpha * float(np.min(aux.gbar(p, a))) if alpha > 0.0 else 0.0
        if alpha < 1.0:
            val += (1.0 - alpha) * float(continuation(aux.belief_step(p, a)))
        return val

    per_state = _simplex_lattice(I, action_resolution)
    best_val, best_a = -np.inf, None
    candidates: list[tuple[float, np.ndarray]] = []
    for combo in itertools.product(range(len(per_state)), repeat=K):
        a = per_state[list(combo)]
        val = objective(a)
        candidates.append((val, a))
        if val > best_val:
            best_val, best_a = val, a

    # local refinement from the best lattice point, on projected coordinates
    def neg_obj(flat: np.ndarray) -> float:
        return -objective(_project_rows(flat.reshape(K, I)))

    res = minimize(
        neg_obj,
        best_a.ravel(),
        method="Nelder-Mead",
        options={"maxiter": refine_iters, "xatol": 1e-6, "fatol": 1e-10},
    )
    refined = _project_rows(res.x.reshape(K, I))
    refined_val = objective(refined)
    improvement = 0.0
    if refined_val > best_val:
        improvement = refined_val - best_val
        best_val, best_a = refined_val, refined
    candidates.append((refined_val, refined))

    b_star = _opponent_from_candidates(aux, p, alpha, continuation, candidates, J)
    lattice_gap = alpha * float(aux.payoff.max() - aux.payoff.min()) / action_resolution
    return StageSolution(
        value=best_val,
        action=best_a,
        opponent=b_star,
        gap_hint=lattice_gap + improvement,
    )


def _project_rows(a: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row onto the probability simplex."""
    out = np.empty_like(a)
    for r, row in enumerate(a):
        srt = np.sort(row)[::-1]
        css = np.cumsum(srt) - 1.0
        idx = np.arange(1, len(row) + 1)
        cond = srt - css / idx > 0
        rho = idx[cond][-1]
        theta = css[cond][-1] / rho
        out[r] = np.clip(row - theta, 0.0, None)
    return out


def _opponent_from_candidates(aux, p, alpha, continuation, candidates, nJ) -> np.ndarray:
    """Mixture over pure opposing actions from the sampled-row matrix game."""
    if alpha <= 0.0:
        return np.full(nJ, 1.0 / nJ)
    ranked = sorted(candidates, key=lambda t: -t[0])[:32]
    rows = []
    for _, a in ranked:
        cont = (
            (1.0 - alpha) * float(continuation(aux.belief_step(p, a)))
            if alpha < 1.0
            else 0.0
        )
        rows.append(alpha * aux.gbar(p, a) + cont)
    sol = matrix_game_value(np.array(rows))
    return sol.col_strategy
