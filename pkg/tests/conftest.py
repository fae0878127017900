"""Shared instances: canonical games, random corpus, session-scoped grids."""

from __future__ import annotations

import numpy as np
import pytest

import rgsolve as rg

AM_MATRICES = [np.array([[1.0, 0.0], [0.0, 0.0]]), np.array([[0.0, 0.0], [0.0, 1.0]])]


@pytest.fixture(scope="session")
def am_quadratic() -> rg.RepeatedGameSpec:
    return rg.build_aumann_maschler(AM_MATRICES, np.array([0.5, 0.5]))


@pytest.fixture(scope="session")
def am_aux(am_quadratic) -> rg.AuxGame:
    return rg.auxiliary_game(am_quadratic)


def make_k1_spec(matrix: np.ndarray) -> rg.RepeatedGameSpec:
    """Single-state repeated matrix game with public actions."""
    return rg.build_aumann_maschler([np.asarray(matrix, float)], np.array([1.0]))


@pytest.fixture(scope="session")
def k1_specs() -> list[tuple[rg.RepeatedGameSpec, float]]:
    """Single-state corpus with exact matrix values computed independently."""
    matrices = [
        np.array([[0.3]]),
        np.array([[1.0, 0.0], [0.0, 1.0]]),
        np.array([[0.9, 0.1], [0.2, 0.8]]),
        np.array([[0.2, 0.7, 0.4], [0.8, 0.1, 0.6]]),
    ]
    out = []
    for m in matrices:
        spec = make_k1_spec(m)
        # oracle on the unit-rescaled payoff table
        sol = rg.matrix_game_value(spec.payoff[0])
        out.append((spec, sol.value))
    return out


def random_informed_game(
    rng: np.random.Generator,
    nK: int = 2,
    nI: int = 2,
    nJ: int = 2,
    nD: int = 2,
) -> rg.RepeatedGameSpec:
    """Random game where signal 1 encodes (state, signal 2) directly and the
    transition ignores player 2's action, so both hypotheses hold by
    construction."""
    states = tuple(f"k{k}" for k in range(nK))
    acts1 = tuple(f"i{i}" for i in range(nI))
    acts2 = tuple(f"j{j}" for j in range(nJ))
    sig2 = tuple(f"d{d}" for d in range(nD))
    sig1 = tuple(f"{s}+{d}" for s in states for d in sig2)

    payoff = rng.random((nK, nI, nJ))
    qbar = rng.random((nK, nI, nK, nD)) + 0.05
    qbar /= qbar.sum(axis=(2, 3), keepdims=True)
    transition = np.zeros((nK, nI, nJ, nK, nK * nD, nD))
    for k in range(nK):
        for i in range(nI):
            for j in range(nJ):
                for kn in range(nK):
                    for d in range(nD):
                        c = kn * nD + d
                        transition[k, i, j, kn, c, d] = qbar[k, i, kn, d]
    init = rng.random((nK, nD)) + 0.05
    init /= init.sum()
    initial = np.zeros((nK, nK * nD, nD))
    for k in range(nK):
        for d in range(nD):
            initial[k, k * nD + d, d] = init[k, d]
    return rg.RepeatedGameSpec(
        states=states,
        actions1=acts1,
        actions2=acts2,
        signals1=sig1,
        signals2=sig2,
        initial=initial,
        payoff=payoff,
        transition=transition,
    )


@pytest.fixture(scope="session")
def random_corpus() -> list[rg.RepeatedGameSpec]:
    rng = np.random.default_rng(20240817)
    return [random_informed_game(rng) for _ in range(20)]


def single_controller_instance() -> tuple[rg.RepeatedGameSpec, list[np.ndarray], np.ndarray, np.ndarray]:
    """Two-state, two-action, fully revealing instance with an absorbing
    profitable state, so windowed estimates converge quickly."""
    g0 = np.array([[0.30, 0.40], [0.20, 0.35]])
    g1 = np.array([[0.72, 0.65], [0.80, 0.70]])
    kernel = np.zeros((2, 2, 2))
    kernel[0, 0] = [1.0, 0.0]  # stay poor
    kernel[0, 1] = [0.1, 0.9]  # move toward rich
    kernel[1, 0] = [0.0, 1.0]  # rich absorbing
    kernel[1, 1] = [0.0, 1.0]
    p0 = np.array([0.6, 0.4])
    spec = rg.build_single_controller([g0, g1], kernel, p0, reveal_state_to_p2=True)
    return spec, [g0, g1], kernel, p0


@pytest.fixture(scope="session")
def single_controller():
    return single_controller_instance()
