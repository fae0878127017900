"""Simplex lattice and certified interpolation of concave 1-Lipschitz data.

Value functions on the belief simplex are concave and nonexpansive for the
l1 ground distance, so grid values bracket them between two computable
envelopes:

* lower: the concave hull of the grid lower values (any barycentric
  combination of grid points is a valid lower bound), combined with the
  Lipschitz lower envelope max_g v[g] - d(x, g);
* upper: pointwise, the Lipschitz upper envelope min_g v[g] + d(x, g);
  for optimization inside a stage step, a concave piecewise-linear
  majorant of that envelope (its concave hull), which is the tightest
  concave function consistent with the data.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..lp import solve_lp

try:  # facet enumeration only needed for three or more states
    from scipy.spatial import ConvexHull, QhullError
except Exception:  # pragma: no cover
    ConvexHull = None


@dataclass(frozen=True, eq=False)
class SimplexGrid:
    """Regular lattice {x : resolution * x integer} on the belief simplex."""

    dim: int
    resolution: int
    points: np.ndarray  # (G, K), lexicographically ordered

    @staticmethod
    def create(dim: int, resolution: int) -> "SimplexGrid":
        if dim < 1 or resolution < 1:
            raise ValueError("dimension and resolution must be positive")
        if dim == 1:
            pts = np.ones((1, 1))
        else:
            combos = itertools.combinations(
                range(resolution + dim - 1), dim - 1
            )
            rows = []
            for cut in combos:
                prev = -1
                parts = []
                for c in cut:
                    parts.append(c - prev - 1)
                    prev = c
                parts.append(resolution + dim - 2 - prev)
                rows.append(parts)
            pts = np.array(rows, dtype=float) / resolution
            order = np.lexsort(pts.T[::-1])
            pts = pts[order]
        return SimplexGrid(dim=dim, resolution=resolution, points=pts)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def spacing(self) -> float:
        return 1.0 / self.resolution

    @property
    def covering_radius(self) -> float:
        """Upper bound on the l1 distance from any belief to the lattice."""
        if self.dim == 1:
            return 0.0
        return (self.dim - 1) / self.resolution

    def l1_to(self, x: np.ndarray) -> np.ndarray:
        return np.abs(self.points - np.asarray(x, float)).sum(axis=1)

    def nearest_index(self, x: np.ndarray) -> int:
        return int(np.argmin(self.l1_to(x)))

    def index_of(self, x: np.ndarray, tol: float = 1e-9) -> int | None:
        idx = self.nearest_index(x)
        return idx if self.l1_to(x)[idx] <= tol else None


def lipschitz_upper(grid: SimplexGrid, values: np.ndarray, x: np.ndarray) -> float:
    """min_g values[g] + d(x, g): valid above any 1-Lipschitz function."""
    return float(np.min(values + grid.l1_to(x)))


def lipschitz_lower(grid: SimplexGrid, values: np.ndarray, x: np.ndarray) -> float:
    return float(np.max(values - grid.l1_to(x)))


def concave_comb_lower(grid: SimplexGrid, values: np.ndarray, x: np.ndarray) -> float:
    """Best barycentric lower bound: max sum lam_g values[g] over
    decompositions of x into grid points (the concave hull at x)."""
    if grid.dim == 1:
        return float(values[0])
    G = grid.size
    A_eq = np.vstack([grid.points.T, np.ones(G)])
    b_eq = np.concatenate([np.asarray(x, float), [1.0]])
    sol = solve_lp(values, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), maximize=True)
    if sol.status != "optimal":
        raise RuntimeError(f"barycentric interpolation LP failed: {sol.status}")
    return float(sol.objective)


def lower_value(grid: SimplexGrid, values: np.ndarray, x: np.ndarray) -> float:
    """Certified lower interpolation of a concave 1-Lipschitz function."""
    return max(
        lipschitz_lower(grid, values, x), concave_comb_lower(grid, values, x)
    )


# ---------------------------------------------------------------------------
# Concave piecewise-linear majorants: value = min over pieces of c + s . x
# ---------------------------------------------------------------------------

Pieces = list[tuple[float, np.ndarray]]


def eval_pieces(pieces: Pieces, x: np.ndarray) -> float:
    x = np.asarray(x, float)
    return min(c + float(s @ x) for c, s in pieces)


def concave_majorant(grid: SimplexGrid, upper_values: np.ndarray) -> Pieces:
    """Concave PWL function dominating every concave nonexpansive function
    that is below ``upper_values`` at the grid points.

    For one- and two-state games this is exactly the concave hull of the
    Lipschitz upper envelope. For more states it is the concave hull of
    the grid graph lifted by a covering correction, which is valid but
    looser (flagged by the engine's diagnostics).
    """
    K = grid.dim
    vals = np.asarray(upper_values, float)
    if K <= 2:
        return cav_pieces_from_points(grid.points, vals)
    return _hull_majorant_highdim(grid, vals)


def cav_pieces_from_points(points: np.ndarray, values: np.ndarray) -> Pieces:
    """Concave hull of the Lipschitz upper envelope of arbitrary sample
    points with valid upper values; exact for one- and two-state simplices,
    vacuous (constant) beyond that."""
    points = np.atleast_2d(np.asarray(points, float))
    vals = np.asarray(values, float)
    K = points.shape[1]
    if K == 1:
        return [(float(vals.min()), np.zeros(1))]
    if K > 2:
        return [(float(vals.max()) + 2.0, np.zeros(K))]
    return _cav_env_dim2(points, vals)


def _cav_env_dim2(points: np.ndarray, vals: np.ndarray) -> Pieces:
    xs = points[:, 0]
    # The envelope N(x) = min_g vals[g] + 2|x0 - g0| is piecewise linear in
    # x0; kinks sit at grid abscissae and at crossings of a rising branch
    # of one cone with a falling branch of another.
    cand = set(float(x) for x in xs)
    for a in range(len(xs)):
        for b in range(len(xs)):
            x = (vals[b] - vals[a] + 2.0 * (xs[a] + xs[b])) / 4.0
            if 0.0 <= x <= 1.0:
                cand.add(float(x))
    cx = np.array(sorted(cand))
    cy = np.array([np.min(vals + 2.0 * np.abs(x - xs)) for x in cx])
    hull: list[int] = []
    for idx in range(len(cx)):
        while len(hull) >= 2:
            x1, y1 = cx[hull[-2]], cy[hull[-2]]
            x2, y2 = cx[hull[-1]], cy[hull[-1]]
            x3, y3 = cx[idx], cy[idx]
            if (y2 - y1) * (x3 - x1) <= (y3 - y1) * (x2 - x1) + 1e-15:
                hull.pop()
            else:
                break
        hull.append(idx)
    pieces: Pieces = []
    for a, b in zip(hull[:-1], hull[1:]):
        x1, y1, x2, y2 = cx[a], cy[a], cx[b], cy[b]
        slope = (y2 - y1) / (x2 - x1)
        pieces.append((float(y1 - slope * x1), np.array([slope, 0.0])))
    if not pieces:
        pieces.append((float(cy[0]), np.zeros(2)))
    return pieces


def _hull_majorant_highdim(grid: SimplexGrid, vals: np.ndarray) -> Pieces:
    K = grid.dim
    rho = grid.covering_radius
    fallback: Pieces = [(float(vals.max()) + rho, np.zeros(K))]
    if ConvexHull is None or grid.size <= K:
        return fallback
    # Hull of the grid graph in free coordinates (drop the last barycentric
    # coordinate); upper facets give affine pieces c + s . x.
    coords = np.column_stack([grid.points[:, : K - 1], vals])
    try:
        hull = ConvexHull(coords, qhull_options="QJ")
    except QhullError:
        return fallback
    pieces: Pieces = []
    lip = 0.0
    for eq in hull.equations:
        normal, offset = eq[:-1], eq[-1]
        nv = normal[-1]
        # upper facets have outward normals pointing up in the value
        # coordinate; near-vertical side walls would extend to wild affine
        # functions, and dropping facets of a concave hull keeps validity
        if nv <= 1e-6 * float(np.linalg.norm(normal)):
            continue
        s_free = -normal[:-1] / nv
        c0 = -offset / nv
        s = np.concatenate([s_free, [0.0]])
        pieces.append((float(c0), s))
        lip = max(lip, (float(s.max()) - float(s.min())) / 2.0)
    if not pieces:
        return fallback
    # Concave data can bulge above the facet interpolation between grid
    # points by at most (1 + Lip(hull)) * covering radius.
    bump = (1.0 + lip) * rho
    return [(c + bump, s) for c, s in pieces]
