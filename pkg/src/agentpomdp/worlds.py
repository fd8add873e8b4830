"""Bundled example models and random instance generators used in tests,
benchmarks, and the reproduction commands."""

from __future__ import annotations

import math

import numpy as np

from .core import AgentStateMachine, DecisionRule, PomdpModel, identity_machine


def fig2_model(gamma: float = 0.9) -> PomdpModel:
    """Three-state chain with a single constant observation.

    Action 0 freezes states 0 and 2 and splits state 1 evenly between them;
    action 1 drives states 0 and 2 toward the (absorbing-under-1) middle
    state.  Rewards: r(., 0) = [-1, 0, 2], r(., 1) = -0.5.  The chain starts
    in state 0.  With the single-state agent machine the best stationary
    rule is stochastic.
    """
    S, A, Y = 3, 2, 1
    kernel = np.zeros((S, A, S, Y))
    kernel[:, 0, :, 0] = [[1.0, 0.0, 0.0], [0.5, 0.0, 0.5], [0.0, 0.0, 1.0]]
    kernel[:, 1, :, 0] = [[0.5, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.5, 0.5]]
    reward = np.array([[-1.0, -0.5], [0.0, -0.5], [2.0, -0.5]])
    init_state = np.array([1.0, 0.0, 0.0])
    init_obs = np.ones((S, Y))
    return PomdpModel(S, A, Y, kernel, reward, init_state, init_obs, gamma)


def fig2_machine() -> AgentStateMachine:
    """Single agent state (the observation is constant)."""
    return identity_machine(1, n_actions=2, label="z1")


def fig1_reward_cells(n_states: int) -> np.ndarray:
    """Boolean mask of the cells (1-based numbers n(n+1)/2 + 1) where action 0
    is the rewarded move-right action."""
    mask = np.zeros(n_states, dtype=bool)
    n = 0
    while True:
        cell = n * (n + 1) // 2 + 1
        if cell > n_states:
            break
        mask[cell - 1] = True
        n += 1
    return mask


def fig1_truncation_length(gamma: float, tail_tol: float) -> int:
    """Smallest N with gamma^N / (1 - gamma) below tail_tol (unit rewards)."""
    return max(3, math.ceil(math.log(tail_tol * (1.0 - gamma)) / math.log(gamma)))


def fig1_model(gamma: float = 0.9, tail_tol: float = 1e-8) -> PomdpModel:
    """Deterministic move-right / reset chain, truncated to N cells.

    The correct action in a cell yields +1 and moves one cell right (the
    last cell wraps to the first); the wrong action yields -1 and resets to
    the first cell.  Cells alternate between two observation colors, which
    is too coarse to identify the correct action, so stationary
    observation-feedback rules are strictly suboptimal while the open-loop
    clairvoyant sequence earns +1 forever.
    """
    N = fig1_truncation_length(gamma, tail_tol)
    rewarded0 = fig1_reward_cells(N)
    S, A, Y = N, 2, 2
    kernel = np.zeros((S, A, S, Y))
    reward = np.empty((S, A))
    for i in range(N):
        right = (i + 1) % N
        good = 0 if rewarded0[i] else 1
        for a in range(A):
            nxt = right if a == good else 0
            kernel[i, a, nxt, nxt % 2] = 1.0
            reward[i, a] = 1.0 if a == good else -1.0
    init_state = np.zeros(S)
    init_state[0] = 1.0
    init_obs = np.zeros((S, Y))
    init_obs[np.arange(S), np.arange(S) % 2] = 1.0
    return PomdpModel(S, A, Y, kernel, reward, init_state, init_obs, gamma)


def fig1_machine(gamma: float = 0.9, tail_tol: float = 1e-8) -> AgentStateMachine:
    """Current-observation machine for the move-right chain (two colors)."""
    return identity_machine(2, n_actions=2, label="color")


def fig1_stationary_optimum(gamma: float) -> float:
    """Best value over the four observation-feedback stationary rules."""
    return (1.0 + gamma - gamma**2) / (1.0 - gamma**3)


def mdp_as_pomdp(transition, reward, init_state, gamma: float) -> PomdpModel:
    """Wrap an MDP as a perfectly observed POMDP (Y = S, y' = s')."""
    T = np.asarray(transition, dtype=float)
    S, A = T.shape[0], T.shape[1]
    kernel = np.zeros((S, A, S, S))
    for s2 in range(S):
        kernel[:, :, s2, s2] = T[:, :, s2]
    init_obs = np.eye(S)
    return PomdpModel(S, A, S, kernel, reward, init_state, init_obs, gamma)


def mdp_fixture(gamma: float = 0.9) -> PomdpModel:
    """Small fixed 3-state MDP used wherever a perfectly observed instance
    is needed (all agent-state policy classes collapse on it)."""
    T = np.array(
        [
            [[0.7, 0.2, 0.1], [0.1, 0.2, 0.7]],
            [[0.3, 0.5, 0.2], [0.05, 0.15, 0.8]],
            [[0.2, 0.3, 0.5], [0.5, 0.4, 0.1]],
        ]
    )
    reward = np.array([[0.1, -0.2], [0.4, 0.3], [-0.5, 1.0]])
    init_state = np.array([0.5, 0.3, 0.2])
    return mdp_as_pomdp(T, reward, init_state, gamma)


def mdp_machine(model: PomdpModel) -> AgentStateMachine:
    """Identity machine over the states of a perfectly observed model."""
    if model.n_obs != model.n_states:
        raise ValueError("identity machine over states needs Y = S")
    return identity_machine(model.n_obs, model.n_actions, label="state")


def random_model(
    rng: np.random.Generator,
    n_states: int,
    n_actions: int,
    n_obs: int,
    gamma: float = 0.9,
    signed_rewards: bool = True,
) -> PomdpModel:
    """Dense random instance: Dirichlet(1) kernel rows, uniform rewards."""
    kernel = rng.dirichlet(np.ones(n_states * n_obs), size=(n_states, n_actions))
    kernel = kernel.reshape(n_states, n_actions, n_states, n_obs)
    lo = -1.0 if signed_rewards else 0.0
    reward = rng.uniform(lo, 1.0, size=(n_states, n_actions))
    init_state = rng.dirichlet(np.ones(n_states))
    init_obs = rng.dirichlet(np.ones(n_obs), size=n_states)
    return PomdpModel(n_states, n_actions, n_obs, kernel, reward, init_state, init_obs, gamma)


def random_mdp(
    rng: np.random.Generator, n_states: int, n_actions: int, gamma: float = 0.9
) -> PomdpModel:
    """Random perfectly observed instance (dense transitions, so every
    exploratory behavior policy makes the product chain irreducible)."""
    T = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    reward = rng.uniform(-1.0, 1.0, size=(n_states, n_actions))
    init_state = rng.dirichlet(np.ones(n_states))
    return mdp_as_pomdp(T, reward, init_state, gamma)


def random_machine(
    rng: np.random.Generator, n_agent_states: int, n_obs: int, n_actions: int
) -> AgentStateMachine:
    """Uniformly random init/update tables."""
    init = rng.integers(0, n_agent_states, size=n_obs)
    update = rng.integers(0, n_agent_states, size=(n_agent_states, n_obs, n_actions))
    return AgentStateMachine(n_agent_states, init, update, label="random")


def random_rule(
    rng: np.random.Generator, n_agent_states: int, n_actions: int, deterministic: bool = False
) -> DecisionRule:
    if deterministic:
        return DecisionRule.deterministic(
            rng.integers(0, n_actions, size=n_agent_states), n_actions
        )
    return DecisionRule.stochastic(rng.dirichlet(np.ones(n_actions), size=n_agent_states))


def uniform_rule(n_agent_states: int, n_actions: int) -> DecisionRule:
    return DecisionRule.stochastic(
        np.full((n_agent_states, n_actions), 1.0 / n_actions)
    )
