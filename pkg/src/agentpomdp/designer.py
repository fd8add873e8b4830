"""Planning over the joint distribution xi in Delta(S x Z).

Under a fixed per-step decision rule the xi-dynamics are deterministic and
bilinear, so optimal non-stationary agent-state policies can be found by
exhaustive tree search over deterministic rule sequences with a certified
geometric tail, branch-and-bound pruning, and dominance memoization on
quantized xi nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import AgentStateMachine, DecisionRule, PomdpModel, enumerate_deterministic_rules
from .errors import CapacityError, ValidationError, capacity_cap

_MEMO_DECIMALS = 12


@dataclass(frozen=True)
class JointXi:
    """Distribution over (environment state, agent state)."""

    dist: np.ndarray  # (S, Z)

    def __post_init__(self):
        d = np.asarray(self.dist, dtype=float)
        object.__setattr__(self, "dist", d)
        if d.ndim != 2:
            raise ValidationError("xi must be a (S, Z) table")
        if d.min() < -1e-12 or abs(d.sum() - 1.0) > 1e-12:
            raise ValidationError("xi must be a normalized nonnegative table")


def xi_init(model: PomdpModel, m: AgentStateMachine) -> JointXi:
    """xi1(s, z) = xi1(s) * sum_y nu(y | s) 1{z = phi0(y)}."""
    S, Z = model.n_states, m.n_agent_states
    dist = np.zeros((S, Z))
    for y in range(model.n_obs):
        z = m.init_fn[y]
        dist[:, z] += model.init_state * model.init_obs[:, y]
    return JointXi(dist)


def _update_matrix(model: PomdpModel, m: AgentStateMachine, probs: np.ndarray):
    """Flat (S*Z, S*Z) transition of xi under a rule, plus the reward vector."""
    S, Z, A, Y = model.n_states, m.n_agent_states, model.n_actions, model.n_obs
    M = np.zeros((S * Z, S * Z))
    for z in range(Z):
        for a in range(A):
            w = probs[z, a]
            if w == 0.0:
                continue
            for y2 in range(Y):
                z2 = m.update_fn[z, y2, a]
                # rows (s, z) -> cols (s2, z2)
                block = w * model.kernel[:, a, :, y2]
                M[z::Z, z2::Z] += block
    r = (probs[None, :, :] * model.reward[:, None, :]).sum(axis=2).reshape(-1)
    return M, r


def xi_update(model: PomdpModel, m: AgentStateMachine, xi: JointXi, rule: DecisionRule) -> JointXi:
    """One deterministic step of the xi-dynamics under the given rule."""
    M, _ = _update_matrix(model, m, rule.probs)
    out = xi.dist.reshape(-1) @ M
    out = np.clip(out, 0.0, None)
    return JointXi((out / out.sum()).reshape(xi.dist.shape))


def xi_reward(xi: JointXi, rule: DecisionRule, reward: np.ndarray) -> float:
    """Expected per-step reward sum_{s,z,a} xi(s,z) pi(a|z) r(s,a)."""
    return float(np.einsum("sz,za,sa->", xi.dist, rule.probs, reward))


@dataclass(frozen=True)
class MetaPlan:
    """Optimal rule sequence with its xi trajectory and certified value."""

    rules: tuple  # DecisionRule per step, length T
    xi_trajectory: tuple  # JointXi, length T + 1
    value_lo: float
    value_hi: float
    rule_class: str  # "deterministic" or "stochastic"

    @property
    def value(self) -> float:
        return 0.5 * (self.value_lo + self.value_hi)

    @property
    def horizon(self) -> int:
        return len(self.rules)


def _mdp_value_upper_bound(model: PomdpModel, tol: float = 1e-10) -> np.ndarray:
    """Optimal value of the fully observed relaxation, V*(s); admissible
    upper bound for any agent-state policy from a known state."""
    P = model.state_kernel()
    V = np.zeros(model.n_states)
    gamma = model.gamma
    while True:
        Q = model.reward + gamma * np.einsum("sap,p->sa", P, V)
        V2 = Q.max(axis=1)
        if np.max(np.abs(V2 - V)) * gamma / (1.0 - gamma) <= tol:
            return V2
        V = V2


def _horizon_for(tol_half: float, gamma: float, r_max: float) -> int:
    if r_max == 0.0:
        return 1
    return max(1, int(np.ceil(np.log(tol_half * (1.0 - gamma) / r_max) / np.log(gamma))))


def _search_rule_sequence(model, m, rules, T, use_memo, node_cap):
    """Exact max over length-T deterministic rule sequences of the truncated
    discounted xi-return.  Returns (value, best index sequence, nodes)."""
    gamma = model.gamma
    mats = [_update_matrix(model, m, rule.probs) for rule in rules]
    n = mats[0][0].shape[0]
    R = len(rules)
    # one (n, R*(n+2)) matmul per node: next xis, step rewards, child bounds
    v_mdp = _mdp_value_upper_bound(model)
    vmdp_flat = np.repeat(v_mdp, m.n_agent_states)
    slack = model.r_max / (1.0 - gamma)
    cols = []
    for M, r in mats:
        cols.append(np.hstack([M, r[:, None], (M @ vmdp_flat)[:, None]]))
    W = np.hstack(cols)  # (n, R*(n+2))

    xi0 = xi_init(model, m).dist.reshape(-1)
    best_val = -np.inf
    best_seq = None
    memo = {}
    nodes = 0
    # stack entries: (t, acc, xi, bound-at-node, chosen-prefix)
    stack = [(0, 0.0, xi0, np.inf, ())]
    gpow = gamma ** np.arange(T + 1)
    while stack:
        t, acc, xi, ub, prefix = stack.pop()
        nodes += 1
        if nodes > node_cap:
            raise CapacityError(f"designer search exceeded {node_cap} nodes")
        if t == T:
            if acc > best_val:
                best_val = acc
                best_seq = prefix
            continue
        if acc + ub <= best_val:
            continue
        if use_memo:
            key = (t, np.round(xi, _MEMO_DECIMALS).tobytes())
            prev = memo.get(key)
            if prev is not None and acc <= prev:
                continue
            memo[key] = acc
        block = (xi @ W).reshape(R, n + 2)
        nxis = block[:, :n]
        steps = block[:, n]
        # admissible bound on each child's remaining truncated return
        child_ub = gpow[t + 1] * (block[:, n + 1] + gpow[T - t - 1] * slack)
        scores = gpow[t] * steps + child_ub
        for i in np.argsort(scores):  # best explored first (stack pops last)
            stack.append(
                (t + 1, acc + gpow[t] * steps[i], nxis[i], child_ub[i], prefix + (int(i),))
            )
    return best_val, best_seq, nodes


def plan_designer(
    model: PomdpModel,
    m: AgentStateMachine,
    tol: float,
    rule_class: str = "deterministic",
    use_memo: bool = True,
    rule_cap: int = None,
    node_cap: int = None,
    vertex_samples: int = 256,
    seed: int = 0,
) -> MetaPlan:
    """Optimal non-stationary plan with a certified value interval of width
    at most tol.

    For rule_class="stochastic" the deterministic optimum is returned (the
    stage objective is bilinear, so the per-stage max sits at a vertex of the
    stochastic-rule polytope) and the vertex property is spot-checked against
    randomly sampled stochastic rule sequences.
    """
    if rule_class not in ("deterministic", "stochastic"):
        raise ValidationError(f"unknown rule class {rule_class!r}")
    rule_cap = capacity_cap(4096) if rule_cap is None else rule_cap
    node_cap = capacity_cap(20_000_000) if node_cap is None else node_cap
    n_det = model.n_actions ** m.n_agent_states
    if n_det > rule_cap:
        raise CapacityError(
            f"{n_det} deterministic rules exceed the cap of {rule_cap}; "
            "reduce the number of agent states or actions"
        )
    rules = list(enumerate_deterministic_rules(m.n_agent_states, model.n_actions, cap=rule_cap))
    gamma = model.gamma
    T = _horizon_for(tol / 2.0, gamma, model.r_max)
    v_t, seq, _ = _search_rule_sequence(model, m, rules, T, use_memo, node_cap)
    tail = gamma**T * model.r_max / (1.0 - gamma)
    chosen = tuple(rules[i] for i in seq)
    xis = [xi_init(model, m)]
    for rule in chosen:
        xis.append(xi_update(model, m, xis[-1], rule))
    if rule_class == "stochastic" and vertex_samples > 0:
        sampled = sample_stochastic_sequences(
            model, m, T, vertex_samples, np.random.default_rng(seed)
        )
        if sampled.max() > v_t + tol:
            raise ValidationError(
                "sampled stochastic sequence exceeded the deterministic "
                f"optimum by {sampled.max() - v_t!r}; vertex property violated"
            )
    return MetaPlan(chosen, tuple(xis), float(v_t - tail), float(v_t + tail), rule_class)


def sample_stochastic_sequences(
    model: PomdpModel,
    m: AgentStateMachine,
    horizon: int,
    n_samples: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Truncated values of random stochastic rule sequences (batched rollout)."""
    S, Z, A, Y = model.n_states, m.n_agent_states, model.n_actions, model.n_obs
    # one-hot of phi over (z, a, y2) -> z2
    E = np.zeros((Z, A, Y, Z))
    for z in range(Z):
        for a in range(A):
            for y2 in range(Y):
                E[z, a, y2, m.update_fn[z, y2, a]] = 1.0
    xi0 = xi_init(model, m).dist
    xis = np.broadcast_to(xi0, (n_samples, S, Z)).copy()
    vals = np.zeros(n_samples)
    gamma = model.gamma
    disc = 1.0
    for t in range(horizon):
        probs = rng.dirichlet(np.ones(A), size=(n_samples, Z))
        vals += disc * np.einsum("nsz,nza,sa->n", xis, probs, model.reward)
        xis = np.einsum("nsz,nza,saxy,zayw->nxw", xis, probs, model.kernel, E)
        disc *= gamma
    return vals


@dataclass(frozen=True)
class NonstationaryClassReport:
    """Deterministic-vs-stochastic certificate at a fixed horizon."""

    horizon: int
    n_samples: int
    best_deterministic: float
    best_sampled_stochastic: float
    gap_min: float
    gap_mean: float
    gap_max: float
    certified: bool  # deterministic optimum >= every sample - 1e-9


def compare_nonstationary_classes(
    model: PomdpModel,
    m: AgentStateMachine,
    horizon: int,
    samples: int,
    rng: np.random.Generator,
    node_cap: int = None,
) -> NonstationaryClassReport:
    """Exhaustive deterministic search vs sampled stochastic sequences at the
    given horizon (truncated values, no tail)."""
    node_cap = capacity_cap(20_000_000) if node_cap is None else node_cap
    rules = list(enumerate_deterministic_rules(m.n_agent_states, model.n_actions))
    best_det, _, _ = _search_rule_sequence(model, m, rules, horizon, True, node_cap)
    vals = sample_stochastic_sequences(model, m, horizon, samples, rng)
    gaps = best_det - vals
    return NonstationaryClassReport(
        horizon=horizon,
        n_samples=samples,
        best_deterministic=best_det,
        best_sampled_stochastic=float(vals.max()),
        gap_min=float(gaps.min()),
        gap_mean=float(gaps.mean()),
        gap_max=float(gaps.max()),
        certified=bool(np.all(gaps >= -1e-9)),
    )
