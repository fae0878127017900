"""Central numeric tolerances.

Two regimes are distinguished everywhere in the package: ``structural``
for identities that must hold up to floating-point arithmetic (simplex
normalization of internally produced objects, affine identities), and
``feasibility`` for user-provided data and LP residuals.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    feasibility: float = 1e-9
    structural: float = 1e-12
    atom_merge: float = 1e-12


TOL = Tolerances()
