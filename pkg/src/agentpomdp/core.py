"""Finite POMDP models, agent-state machines, decision rules, and histories.

A model is a controlled joint chain P(s', y' | s, a) with reward r(s, a),
an initial state distribution, and an initial-observation kernel.  An agent
state is a finite local summary updated as z' = phi(z, y', a) from
z1 = phi0(y1); everything downstream (product chains, the designer's
recursion, learning fixed points) is built on these two objects.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, ImpossibleObservationError, ValidationError

_ATOL = 1e-12


def _frozen_array(x, dtype=float):
    a = np.array(x, dtype=dtype)
    a.setflags(write=False)
    return a


def _check_rows_normalized(arr, what, atol=_ATOL):
    if np.any(arr < -atol):
        raise ValidationError(f"{what} has negative entries")
    sums = arr.sum(axis=-1)
    if not np.allclose(sums, 1.0, rtol=0.0, atol=atol):
        worst = np.unravel_index(np.argmax(np.abs(sums - 1.0)), sums.shape)
        raise ValidationError(
            f"{what} row {worst} sums to {sums[worst]!r}, expected 1"
        )


@dataclass(frozen=True)
class PomdpModel:
    """Finite POMDP with joint transition-observation kernel.

    kernel[s, a, s2, y2] = P(s2, y2 | s, a); reward[s, a] is bounded by
    r_max in absolute value; init_state is the distribution of the first
    state and init_obs[s, y] the distribution of the first observation
    given the first state.
    """

    n_states: int
    n_actions: int
    n_obs: int
    kernel: np.ndarray
    reward: np.ndarray
    init_state: np.ndarray
    init_obs: np.ndarray
    gamma: float
    r_max: float = field(default=None)  # defaults to max |reward|

    def __post_init__(self):
        object.__setattr__(self, "kernel", _frozen_array(self.kernel))
        object.__setattr__(self, "reward", _frozen_array(self.reward))
        object.__setattr__(self, "init_state", _frozen_array(self.init_state))
        object.__setattr__(self, "init_obs", _frozen_array(self.init_obs))
        S, A, Y = self.n_states, self.n_actions, self.n_obs
        if self.kernel.shape != (S, A, S, Y):
            raise ValidationError(
                f"kernel shape {self.kernel.shape} != {(S, A, S, Y)}"
            )
        if self.reward.shape != (S, A):
            raise ValidationError(f"reward shape {self.reward.shape} != {(S, A)}")
        if self.init_state.shape != (S,):
            raise ValidationError("init_state must have one entry per state")
        if self.init_obs.shape != (S, Y):
            raise ValidationError("init_obs must be (n_states, n_obs)")
        if not (0.0 < self.gamma < 1.0):
            raise ValidationError(f"gamma must lie in (0, 1), got {self.gamma}")
        _check_rows_normalized(self.kernel.reshape(S, A, S * Y), "kernel")
        _check_rows_normalized(self.init_state[None, :], "init_state")
        _check_rows_normalized(self.init_obs, "init_obs")
        if self.r_max is None:
            object.__setattr__(self, "r_max", float(np.max(np.abs(self.reward))))
        if np.max(np.abs(self.reward)) > self.r_max + _ATOL:
            raise ValidationError("reward exceeds r_max in absolute value")

    def state_kernel(self) -> np.ndarray:
        """Marginal P(s2 | s, a), shape (S, A, S)."""
        return self.kernel.sum(axis=3)

    def obs_kernel(self) -> np.ndarray:
        """Marginal P(y2 | s, a), shape (S, A, Y)."""
        return self.kernel.sum(axis=2)

    def check_index(self, s=None, a=None, y=None):
        if s is not None and not (0 <= s < self.n_states):
            raise ValidationError(f"state {s} out of range [0, {self.n_states})")
        if a is not None and not (0 <= a < self.n_actions):
            raise ValidationError(f"action {a} out of range [0, {self.n_actions})")
        if y is not None and not (0 <= y < self.n_obs):
            raise ValidationError(f"observation {y} out of range [0, {self.n_obs})")


@dataclass(frozen=True)
class AgentStateMachine:
    """Deterministic agent-state recursion: z1 = init_fn[y1], z' = update_fn[z, y', a]."""

    n_agent_states: int
    init_fn: np.ndarray  # (Y,) -> Z
    update_fn: np.ndarray  # (Z, Y, A) -> Z
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "init_fn", _frozen_array(self.init_fn, dtype=np.int64))
        object.__setattr__(self, "update_fn", _frozen_array(self.update_fn, dtype=np.int64))
        Z = self.n_agent_states
        if self.init_fn.ndim != 1:
            raise ValidationError("init_fn must be a 1-d table over observations")
        if self.update_fn.ndim != 3 or self.update_fn.shape[0] != Z:
            raise ValidationError("update_fn must be a (Z, Y, A) table")
        for name, tab in (("init_fn", self.init_fn), ("update_fn", self.update_fn)):
            if tab.size and (tab.min() < 0 or tab.max() >= Z):
                raise ValidationError(f"{name} maps outside [0, {Z})")

    @property
    def n_obs(self) -> int:
        return self.init_fn.shape[0]

    @property
    def n_actions(self) -> int:
        return self.update_fn.shape[2]


@dataclass(frozen=True)
class DecisionRule:
    """One-step map from agent state to (a distribution over) actions."""

    probs: np.ndarray  # (Z, A), rows on the simplex
    is_deterministic: bool

    def __post_init__(self):
        object.__setattr__(self, "probs", _frozen_array(self.probs))
        if self.probs.ndim != 2:
            raise ValidationError("decision rule table must be (Z, A)")
        _check_rows_normalized(self.probs, "decision rule")
        if self.is_deterministic and not np.all(
            np.isclose(self.probs, np.round(self.probs), atol=_ATOL)
        ):
            raise ValidationError("deterministic rule must have one-hot rows")

    @classmethod
    def deterministic(cls, actions, n_actions: int) -> "DecisionRule":
        actions = np.asarray(actions, dtype=np.int64)
        if actions.size and (actions.min() < 0 or actions.max() >= n_actions):
            raise ValidationError("rule action out of range")
        probs = np.zeros((actions.shape[0], n_actions))
        probs[np.arange(actions.shape[0]), actions] = 1.0
        return cls(probs=probs, is_deterministic=True)

    @classmethod
    def stochastic(cls, probs) -> "DecisionRule":
        return cls(probs=np.asarray(probs, dtype=float), is_deterministic=False)

    @property
    def actions(self) -> np.ndarray:
        """Action table for a deterministic rule."""
        if not self.is_deterministic:
            raise ValidationError("stochastic rule has no action table")
        return np.argmax(self.probs, axis=1)

    @property
    def n_agent_states(self) -> int:
        return self.probs.shape[0]

    @property
    def n_actions(self) -> int:
        return self.probs.shape[1]


@dataclass(frozen=True)
class Policy:
    """Stationary rule or a finite rule sequence followed by a stationary tail."""

    rules: tuple
    tail: DecisionRule
    is_stationary: bool

    def __post_init__(self):
        if not self.is_stationary and len(self.rules) == 0:
            raise ValidationError("non-stationary policy needs at least one rule")
        shapes = {r.probs.shape for r in self.rules} | {self.tail.probs.shape}
        if len(shapes) != 1:
            raise ValidationError("all rules in a policy must share one shape")

    @classmethod
    def stationary(cls, rule: DecisionRule) -> "Policy":
        return cls(rules=(), tail=rule, is_stationary=True)

    @classmethod
    def non_stationary(cls, rules, tail: DecisionRule) -> "Policy":
        return cls(rules=tuple(rules), tail=tail, is_stationary=False)

    def rule_at(self, t: int) -> DecisionRule:
        """Rule applied at 0-based step t."""
        if t < len(self.rules):
            return self.rules[t]
        return self.tail


@dataclass(frozen=True)
class History:
    """Observation/action prefix (y1..yt, a1..a{t-1})."""

    observations: tuple
    actions: tuple

    def __post_init__(self):
        object.__setattr__(self, "observations", tuple(self.observations))
        object.__setattr__(self, "actions", tuple(self.actions))
        if len(self.observations) != len(self.actions) + 1:
            raise ValidationError(
                "history needs exactly one more observation than actions"
            )


def sample_step(model: PomdpModel, s: int, a: int, rng: np.random.Generator):
    """Draw (s2, y2, reward) from the joint kernel at (s, a)."""
    model.check_index(s=s, a=a)
    flat = model.kernel[s, a].ravel()
    idx = rng.choice(flat.shape[0], p=flat)
    s2, y2 = divmod(int(idx), model.n_obs)
    return s2, y2, float(model.reward[s, a])


def agent_state_init(m: AgentStateMachine, y1: int) -> int:
    if not (0 <= y1 < m.n_obs):
        raise ValidationError(f"observation {y1} out of range [0, {m.n_obs})")
    return int(m.init_fn[y1])


def agent_state_update(m: AgentStateMachine, z: int, y2: int, a: int) -> int:
    if not (0 <= z < m.n_agent_states):
        raise ValidationError(f"agent state {z} out of range [0, {m.n_agent_states})")
    if not (0 <= y2 < m.n_obs):
        raise ValidationError(f"observation {y2} out of range [0, {m.n_obs})")
    if not (0 <= a < m.n_actions):
        raise ValidationError(f"action {a} out of range [0, {m.n_actions})")
    return int(m.update_fn[z, y2, a])


def compress_history(m: AgentStateMachine, h: History) -> int:
    """Left-fold of the agent-state update over a history."""
    if len(h.observations) == 0:
        raise ValidationError("cannot compress an empty history")
    z = agent_state_init(m, h.observations[0])
    for y2, a in zip(h.observations[1:], h.actions):
        z = agent_state_update(m, z, y2, a)
    return z


# ---------------------------------------------------------------------------
# Window machines
# ---------------------------------------------------------------------------

def identity_machine(n_obs: int, n_actions: int = 1, label: str = "identity") -> AgentStateMachine:
    """Agent state equals the current observation."""
    init = np.arange(n_obs, dtype=np.int64)
    update = np.zeros((n_obs, n_obs, n_actions), dtype=np.int64)
    update[:] = np.arange(n_obs, dtype=np.int64)[None, :, None]
    return AgentStateMachine(n_obs, init, update, label=label)


def window_size(n: int, n_obs: int, n_actions: int) -> int:
    """Number of window states: current observation plus n padded (y, a) pairs."""
    return n_obs * (n_obs + 1) ** n * (n_actions + 1) ** n


def encode_window(past, y_now: int, n: int, n_obs: int, n_actions: int) -> int:
    """Encode ((y_{t-n}, a_{t-n}), ..., (y_{t-1}, a_{t-1}), y_t) as one index.

    Pre-history slots hold the padding symbols n_obs / n_actions.
    """
    if len(past) != n:
        raise ValidationError(f"expected {n} past (y, a) pairs, got {len(past)}")
    code = 0
    for y, a in past:
        code = code * (n_obs + 1) + y
        code = code * (n_actions + 1) + a
    return code * n_obs + y_now


def decode_window(z: int, n: int, n_obs: int, n_actions: int):
    """Inverse of encode_window; returns (past pairs, current observation)."""
    z, y_now = divmod(z, n_obs)
    past = []
    for _ in range(n):
        z, a = divmod(z, n_actions + 1)
        z, y = divmod(z, n_obs + 1)
        past.append((y, a))
    past.reverse()
    return tuple(past), y_now


def window_machine(n: int, n_obs: int, n_actions: int, cap: int = None) -> AgentStateMachine:
    """Sliding window of the last n (observation, action) pairs plus the
    current observation; padding symbols fill pre-history slots."""
    if n < 0:
        raise ValidationError("window length must be >= 0")
    if n == 0:
        return identity_machine(n_obs, n_actions, label="window[0]")
    from .errors import capacity_cap

    cap = capacity_cap(10**6) if cap is None else cap
    n_z = window_size(n, n_obs, n_actions)
    if n_z > cap:
        raise CapacityError(f"window machine needs {n_z} states, cap is {cap}")
    init = np.empty(n_obs, dtype=np.int64)
    pad = tuple((n_obs, n_actions) for _ in range(n))
    for y in range(n_obs):
        init[y] = encode_window(pad, y, n, n_obs, n_actions)
    update = np.empty((n_z, n_obs, n_actions), dtype=np.int64)
    for z in range(n_z):
        past, y_now = decode_window(z, n, n_obs, n_actions)
        for y2 in range(n_obs):
            for a in range(n_actions):
                shifted = past[1:] + ((y_now, a),)
                update[z, y2, a] = encode_window(shifted, y2, n, n_obs, n_actions)
    return AgentStateMachine(n_z, init, update, label=f"window[{n}]")


# ---------------------------------------------------------------------------
# Belief filtering and belief-lattice machines
# ---------------------------------------------------------------------------

def belief_update(model: PomdpModel, b, a: int, y2: int) -> np.ndarray:
    """Bayes step: b2(s2) proportional to sum_s b(s) P(s2, y2 | s, a)."""
    model.check_index(a=a, y=y2)
    b = np.asarray(b, dtype=float)
    if b.shape != (model.n_states,) or abs(b.sum() - 1.0) > 1e-9 or b.min() < -_ATOL:
        raise ValidationError("belief must be a distribution over states")
    post = b @ model.kernel[:, a, :, y2]
    total = post.sum()
    if total <= 0.0:
        raise ImpossibleObservationError(
            f"observation {y2} has probability 0 under the given belief and action {a}"
        )
    return post / total


def belief_lattice(n_states: int, k: int) -> np.ndarray:
    """All distributions over n_states with entries that are multiples of 1/k,
    in lexicographic order; shape (count, n_states)."""
    if k < 1:
        raise ValidationError("lattice resolution must be >= 1")
    points = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            points.append(prefix + [remaining])
            return
        for c in range(remaining + 1):
            rec(prefix + [c], remaining - c, slots - 1)

    rec([], k, n_states)
    return np.array(points, dtype=float) / k


def project_to_lattice(b, lattice: np.ndarray) -> int:
    """Index of the l1-nearest lattice point; ties go to the lexicographically
    smallest point (the lattice is generated in lexicographic order)."""
    d = np.abs(lattice - np.asarray(b)[None, :]).sum(axis=1)
    return int(np.argmin(d))


def belief_machine(model: PomdpModel, k: int, cap: int = None) -> AgentStateMachine:
    """Belief filter discretized onto the 1/k lattice of the state simplex.

    The update applies the exact Bayes step from the lattice point, then
    projects back.  A zero-probability observation (possible because the
    lattice point may have dropped support that the true filter retains)
    falls back to the observation-free prediction step, keeping the update
    total.
    """
    from .errors import capacity_cap

    cap = capacity_cap(10**6) if cap is None else cap
    n_z = math.comb(k + model.n_states - 1, model.n_states - 1)
    if n_z > cap:
        raise CapacityError(f"belief lattice needs {n_z} points, cap is {cap}")
    lattice = belief_lattice(model.n_states, k)
    init = np.empty(model.n_obs, dtype=np.int64)
    for y in range(model.n_obs):
        post = model.init_state * model.init_obs[:, y]
        total = post.sum()
        b = post / total if total > 0.0 else model.init_state
        init[y] = project_to_lattice(b, lattice)
    update = np.empty((n_z, model.n_obs, model.n_actions), dtype=np.int64)
    state_kernel = model.state_kernel()
    for z in range(n_z):
        b = lattice[z]
        for a in range(model.n_actions):
            pred = b @ state_kernel[:, a, :]  # fallback when y2 is impossible
            for y2 in range(model.n_obs):
                post = b @ model.kernel[:, a, :, y2]
                total = post.sum()
                b2 = post / total if total > 0.0 else pred
                update[z, y2, a] = project_to_lattice(b2, lattice)
    return AgentStateMachine(n_z, init, update, label=f"belief[{k}]")


def enumerate_deterministic_rules(n_agent_states: int, n_actions: int, cap: int = None):
    """Yield every deterministic rule table (Z -> A); capped enumeration."""
    from .errors import capacity_cap

    cap = capacity_cap(10**6) if cap is None else cap
    count = n_actions**n_agent_states
    if count > cap:
        raise CapacityError(
            f"{count} deterministic rules exceed the cap of {cap}"
        )
    for actions in itertools.product(range(n_actions), repeat=n_agent_states):
        yield DecisionRule.deterministic(np.array(actions), n_actions)
