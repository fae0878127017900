"""Strategy extraction for both players, plus the concavification oracle.

Player 1's rules come from the maximizing stacked actions stored during
backward induction; player 2's from the minimizing mixtures of the upper
stage LPs. Off-lattice beliefs fall back to the nearest lattice point in
l1, so each extracted object reports a guarantee slack: certification gap
plus the nonexpansiveness loss of the lookup.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .game_model import AuxGame, RepeatedGameSpec, auxiliary_game
from .lp import matrix_game_value
from .values.engine import ValueGrid, value_theta_grid
from .values.grid import eval_pieces
from .values.thetas import ThetaWeights, theta_shift

try:
    from scipy.spatial import ConvexHull, QhullError
except Exception:  # pragma: no cover
    ConvexHull = None


def _nearest(atoms: np.ndarray, p: np.ndarray) -> int:
    return int(np.argmin(np.abs(atoms - np.asarray(p, float)).sum(axis=1)))


@dataclass(frozen=True, eq=False)
class MarkovStrategy1:
    """Stage-indexed informed-player rules: belief -> stacked mixed action.

    Beyond the computed stages the strategy switches to maintenance: the
    optimal mixture of the belief-averaged one-shot game, played in every
    state. Being state-independent it reveals nothing, so the belief
    freezes and the stage guarantee holds at the non-revealing value;
    repeating the finite-horizon rules instead would keep spending the
    informational advantage and collapse the long-run average.
    """

    stage_atoms: tuple[np.ndarray, ...]
    stage_actions: tuple[np.ndarray, ...]  # per stage: (R, K, I)
    slack: float
    payoff_tensor: np.ndarray | None = None  # (K, I, J) for the maintenance rule
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "_tail_cache", {})

    def stacked_action(self, t: int, p: np.ndarray) -> np.ndarray:
        if t > len(self.stage_atoms) and self.payoff_tensor is not None:
            return self._maintenance(p)
        idx = min(t, len(self.stage_atoms)) - 1
        return self.stage_actions[idx][_nearest(self.stage_atoms[idx], p)]

    def _maintenance(self, p: np.ndarray) -> np.ndarray:
        key = np.round(np.asarray(p, float), 12).tobytes()
        if key not in self._tail_cache:
            avg = np.einsum("k,kij->ij", np.asarray(p, float), self.payoff_tensor)
            row = matrix_game_value(avg).row_strategy
            self._tail_cache[key] = np.tile(row, (self.payoff_tensor.shape[0], 1))
        return self._tail_cache[key]

    def to_json(self) -> dict:
        return {
            "player": 1,
            "slack": self.slack,
            "meta": self.meta,
            "payoff_tensor": (
                self.payoff_tensor.tolist() if self.payoff_tensor is not None else None
            ),
            "stages": [
                {
                    "beliefs": atoms.tolist(),
                    "actions": acts.tolist(),
                }
                for atoms, acts in zip(self.stage_atoms, self.stage_actions)
            ],
        }

    @staticmethod
    def from_json(doc: dict) -> "MarkovStrategy1":
        stages = doc["stages"]
        tensor = doc.get("payoff_tensor")
        return MarkovStrategy1(
            stage_atoms=tuple(np.asarray(s["beliefs"], float) for s in stages),
            stage_actions=tuple(np.asarray(s["actions"], float) for s in stages),
            slack=float(doc.get("slack", 0.0)),
            payoff_tensor=np.asarray(tensor, float) if tensor is not None else None,
            meta=doc.get("meta", {}),
        )


@dataclass(frozen=True, eq=False)
class BlockStrategy2:
    """Blockwise uninformed-player rules: belief -> mixture over own actions.

    The schedule lists block lengths; ``cyclic`` repeats it forever,
    otherwise play continues with the last block's rules. Rules are
    indexed per block and in-block stage.
    """

    schedule: tuple[int, ...]
    block_atoms: tuple[tuple[np.ndarray, ...], ...]  # [block][in-block stage]
    block_mixtures: tuple[tuple[np.ndarray, ...], ...]  # [block][stage]: (R, J)
    cyclic: bool
    slack: float
    meta: dict = field(default_factory=dict)

    def _locate(self, t: int) -> tuple[int, int]:
        total = sum(self.schedule)
        t0 = t - 1
        if self.cyclic:
            t0 %= total
        elif t0 >= total:
            return len(self.schedule) - 1, self.schedule[-1] - 1
        for b, length in enumerate(self.schedule):
            if t0 < length:
                return b, t0
            t0 -= length
        return len(self.schedule) - 1, self.schedule[-1] - 1

    def mixture(self, t: int, p: np.ndarray) -> np.ndarray:
        b, s = self._locate(t)
        atoms = self.block_atoms[b][s]
        return self.block_mixtures[b][s][_nearest(atoms, p)]

    def to_json(self) -> dict:
        return {
            "player": 2,
            "cyclic": self.cyclic,
            "schedule": list(self.schedule),
            "slack": self.slack,
            "meta": self.meta,
            "blocks": [
                [
                    {"beliefs": atoms.tolist(), "mixtures": mix.tolist()}
                    for atoms, mix in zip(batoms, bmix)
                ]
                for batoms, bmix in zip(self.block_atoms, self.block_mixtures)
            ],
        }

    @staticmethod
    def from_json(doc: dict) -> "BlockStrategy2":
        blocks = doc["blocks"]
        return BlockStrategy2(
            schedule=tuple(doc["schedule"]),
            block_atoms=tuple(
                tuple(np.asarray(s["beliefs"], float) for s in blk) for blk in blocks
            ),
            block_mixtures=tuple(
                tuple(np.asarray(s["mixtures"], float) for s in blk) for blk in blocks
            ),
            cyclic=bool(doc.get("cyclic", True)),
            slack=float(doc.get("slack", 0.0)),
            meta=doc.get("meta", {}),
        )


def load_strategy(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("player") == 1:
        return MarkovStrategy1.from_json(doc)
    if doc.get("player") == 2:
        return BlockStrategy2.from_json(doc)
    raise ValueError("strategy file must declare player 1 or 2")


def save_strategy(strategy, path) -> None:
    with open(path, "w") as fh:
        json.dump(strategy.to_json(), fh, indent=2)


def _strategy_slack(vg: ValueGrid) -> float:
    return vg.gap + vg.grid.covering_radius


def extract_p1_markov(
    spec: RepeatedGameSpec | AuxGame,
    n: int | None = None,
    theta: ThetaWeights | None = None,
    resolution: int | None = None,
    vgrid: ValueGrid | None = None,
    long_run: bool = False,
) -> MarkovStrategy1:
    """Informed-player rules from the backward-induction argmax tables.

    ``long_run`` trims the endgame rules (stages whose remaining weight is
    at least half on the current stage, which spend information myopically)
    and relies on the maintenance tail; use it when auditing horizons far
    beyond the extraction horizon.
    """
    aux = spec if isinstance(spec, AuxGame) else auxiliary_game(spec)
    if vgrid is None:
        if theta is None:
            if n is None:
                raise ValueError("provide a horizon, a stage measure, or a value grid")
            theta = ThetaWeights.uniform(n)
        vgrid = value_theta_grid(aux, theta, resolution)
    atoms = vgrid.grid.points
    rules = vgrid.stage_rules
    if long_run:
        kept = [r for r in rules if r.alpha < 0.5]
        rules = tuple(kept) if kept else rules[:1]
    return MarkovStrategy1(
        stage_atoms=tuple(atoms for _ in rules),
        stage_actions=tuple(rule.argmax for rule in rules),
        slack=_strategy_slack(vgrid),
        payoff_tensor=aux.payoff,
        meta={"kind": "markov-argmax", "long_run": long_run, **vgrid.meta},
    )


def extract_p1_longrun(
    spec: RepeatedGameSpec | AuxGame,
    prep_stages: int = 4,
    resolution: int | None = None,
) -> MarkovStrategy1:
    """Long-horizon informed-player strategy: position, then maintain.

    The maintenance rule holds the non-revealing value of the current
    belief forever (state-independent mixtures reveal nothing). The first
    ``prep_stages`` rules spend payoff-free stages steering the belief
    measure toward high maintenance levels: each is a one-stage control
    step against the Lipschitz lower envelope of the tabulated
    non-revealing value. For games where information only loses value the
    steps reduce to staying put.
    """
    from .values.engine import default_resolution
    from .values.grid import SimplexGrid, lipschitz_lower
    from .values.stage import stage_solve

    aux = spec if isinstance(spec, AuxGame) else auxiliary_game(spec)
    res = resolution or default_resolution(aux.nK)
    grid = SimplexGrid.create(aux.nK, res)
    level = np.array(
        [
            matrix_game_value(np.einsum("k,kij->ij", p, aux.payoff)).value
            for p in grid.points
        ]
    )
    rules = []
    for _ in range(prep_stages):
        cont = lambda measure: sum(
            w * lipschitz_lower(grid, level, atom)
            for atom, w in zip(measure.atoms, measure.weights)
        )
        actions = np.empty((grid.size, aux.nK, aux.nI))
        new_level = np.empty(grid.size)
        for g, p in enumerate(grid.points):
            # small payoff weight breaks positioning ties toward earning
            sol = stage_solve(aux, p, 0.05, cont, refine_iters=50)
            actions[g] = sol.action
            new_level[g] = (sol.value - 0.05 * float(np.min(aux.gbar(p, sol.action)))) / 0.95
        rules.append(actions)
        level = new_level
    rules.reverse()  # earliest positioning step first
    return MarkovStrategy1(
        stage_atoms=tuple(grid.points for _ in rules),
        stage_actions=tuple(rules),
        slack=grid.covering_radius,
        payoff_tensor=aux.payoff,
        meta={"kind": "longrun-positioning", "prep_stages": prep_stages},
    )


def build_p2_cyclic(
    spec: RepeatedGameSpec | AuxGame,
    n: int,
    resolution: int | None = None,
    vgrid: ValueGrid | None = None,
) -> BlockStrategy2:
    """Cyclic repetition of the n-stage minimizing rules.

    The payoff-stage rules of any shifted n-stage game coincide, so the
    cycle is simultaneously optimal (up to certification slack) in every
    block-aligned shifted game; the guarantee at horizons divisible by n
    is the windowed sup over shifts of the shifted values.
    """
    aux = spec if isinstance(spec, AuxGame) else auxiliary_game(spec)
    if vgrid is None:
        vgrid = value_theta_grid(aux, ThetaWeights.uniform(n), resolution)
    atoms = vgrid.grid.points
    rules = vgrid.stage_rules
    return BlockStrategy2(
        schedule=(n,),
        block_atoms=(tuple(atoms for _ in rules),),
        block_mixtures=(tuple(rule.opponent for rule in rules),),
        cyclic=True,
        slack=_strategy_slack(vgrid),
        meta={"kind": "cyclic", "n": n, **vgrid.meta},
    )


def build_p2_growing(
    spec: RepeatedGameSpec | AuxGame,
    resolution: int | None = None,
    max_block: int = 10,
) -> BlockStrategy2:
    """Blocks of growing length: block m (length m) plays the minimizing
    rules of the game averaging stages m(m-1)/2 + 1 .. m(m+1)/2."""
    aux = spec if isinstance(spec, AuxGame) else auxiliary_game(spec)
    block_atoms = []
    block_mixtures = []
    slack = 0.0
    for m in range(1, max_block + 1):
        offset = m * (m - 1) // 2
        vg = value_theta_grid(aux, theta_shift(ThetaWeights.uniform(m), offset), resolution)
        payoff_rules = vg.stage_rules[offset:]
        atoms = vg.grid.points
        block_atoms.append(tuple(atoms for _ in payoff_rules))
        block_mixtures.append(tuple(rule.opponent for rule in payoff_rules))
        slack = max(slack, _strategy_slack(vg))
    return BlockStrategy2(
        schedule=tuple(range(1, max_block + 1)),
        block_atoms=tuple(block_atoms),
        block_mixtures=tuple(block_mixtures),
        cyclic=False,
        slack=slack,
        meta={"kind": "growing", "max_block": max_block},
    )


# ---------------------------------------------------------------------------
# Concavification oracle for the fixed-state perfect-monitoring subclass
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CavUOracle:
    """Least concave majorant of the one-shot mixed value p -> val(sum p^k G^k).

    Ground truth for the fixed-state subclass: interpolation error of the
    sampled envelope is at most the payoff Lipschitz constant times the
    sample covering radius.
    """

    points: np.ndarray  # (G, K)
    u_values: np.ndarray
    pieces: list
    error_bound: float

    def u(self, p: np.ndarray) -> float:
        idx = _nearest(self.points, p)
        return float(self.u_values[idx])

    def cav(self, p: np.ndarray) -> float:
        return eval_pieces(self.pieces, np.asarray(p, float))


def cavu_oracle(matrices: list[np.ndarray], resolution: int = 64) -> CavUOracle:
    """Tabulate the non-revealing value on a simplex lattice and build its
    upper concave envelope (exact hull of the sampled graph)."""
    mats = np.stack([np.asarray(m, float) for m in matrices])
    K = mats.shape[0]
    if K > 3:
        raise ValueError("concavification oracle supports at most 3 states")
    from .values.grid import SimplexGrid

    grid = SimplexGrid.create(K, resolution)
    u_vals = np.array(
        [matrix_game_value(np.einsum("k,kij->ij", p, mats)).value for p in grid.points]
    )
    lip = float(np.abs(mats).max())
    rho = grid.covering_radius
    if K <= 2:
        pieces = _hull_pieces_1d(grid.points[:, 0], u_vals)
    else:
        pieces = _hull_pieces_2d(grid.points, u_vals)
    return CavUOracle(
        points=grid.points,
        u_values=u_vals,
        pieces=pieces,
        error_bound=lip * rho,
    )


def _hull_pieces_1d(xs: np.ndarray, ys: np.ndarray):
    order = np.argsort(xs)
    xs, ys = xs[order], ys[order]
    hull: list[int] = []
    for idx in range(len(xs)):
        while len(hull) >= 2:
            x1, y1 = xs[hull[-2]], ys[hull[-2]]
            x2, y2 = xs[hull[-1]], ys[hull[-1]]
            x3, y3 = xs[idx], ys[idx]
            if (y2 - y1) * (x3 - x1) <= (y3 - y1) * (x2 - x1) + 1e-15:
                hull.pop()
            else:
                break
        hull.append(idx)
    pieces = []
    for a, b in zip(hull[:-1], hull[1:]):
        slope = (ys[b] - ys[a]) / (xs[b] - xs[a])
        pieces.append((float(ys[a] - slope * xs[a]), np.array([slope, 0.0])))
    if not pieces:
        pieces.append((float(ys[0]), np.zeros(2)))
    return pieces


def _hull_pieces_2d(points: np.ndarray, vals: np.ndarray):
    if ConvexHull is None:
        raise RuntimeError("scipy.spatial required for 3-state concavification")
    coords = np.column_stack([points[:, :2], vals])
    try:
        hull = ConvexHull(coords, qhull_options="QJ")
    except QhullError:
        return [(float(vals.max()), np.zeros(3))]
    pieces = []
    for eq in hull.equations:
        normal, offset = eq[:-1], eq[-1]
        if normal[-1] <= 1e-6 * float(np.linalg.norm(normal)):
            continue
        s_free = -normal[:-1] / normal[-1]
        c0 = -offset / normal[-1]
        pieces.append((float(c0), np.concatenate([s_free, [0.0]])))
    return pieces or [(float(vals.max()), np.zeros(3))]
