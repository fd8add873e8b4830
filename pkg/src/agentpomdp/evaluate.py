"""Exact evaluation on the joint (environment state, agent state) chain:
policy evaluation, action values, occupancy measures, stationary
distributions, and Monte-Carlo cross-checks."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csgraph, csr_matrix

from . import _kernels
from .core import AgentStateMachine, DecisionRule, Policy, PomdpModel
from .errors import AmbiguousChainError, CapacityError, capacity_cap

_DIRECT_SOLVE_LIMIT = 2000


@dataclass(frozen=True)
class ProductChain:
    """Controlled chain over (s, z): kernel[s, z, a, s2, z2]."""

    kernel: np.ndarray
    reward: np.ndarray  # (S, A) view of the model reward
    n_states: int
    n_agent_states: int
    n_actions: int

    @property
    def n_joint(self) -> int:
        return self.n_states * self.n_agent_states

    def flat_kernel(self) -> np.ndarray:
        """(n_joint, A, n_joint) view, joint index = s * Z + z."""
        n = self.n_joint
        return self.kernel.reshape(n, self.n_actions, n)


def build_product_chain(
    model: PomdpModel, m: AgentStateMachine, cap: int = None
) -> ProductChain:
    """kernel[s, z, a, s2, z2] = sum_y2 P(s2, y2 | s, a) 1{z2 = phi(z, y2, a)}."""
    S, A, Y, Z = model.n_states, model.n_actions, model.n_obs, m.n_agent_states
    cap = capacity_cap(_DIRECT_SOLVE_LIMIT) if cap is None else cap
    if S * Z > cap:
        raise CapacityError(f"product chain has {S * Z} joint states, cap is {cap}")
    kernel = np.zeros((S, Z, A, S, Z))
    for z in range(Z):
        for a in range(A):
            for y2 in range(Y):
                z2 = m.update_fn[z, y2, a]
                kernel[:, z, a, :, z2] += model.kernel[:, a, :, y2]
    return ProductChain(kernel, model.reward, S, Z, A)


@dataclass(frozen=True)
class EvalBundle:
    """Value, action value, occupancy, and scalar performance of one rule."""

    v: np.ndarray  # (S, Z)
    q: np.ndarray  # (S, Z, A)
    d: np.ndarray  # (S, Z, A), discounted unnormalized occupancy
    j: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("s,z,a,V,Q,d\n")
        S, Z, A = self.q.shape
        for s in range(S):
            for z in range(Z):
                for a in range(A):
                    buf.write(
                        f"{s},{z},{a},{float(self.v[s, z])!r},{float(self.q[s, z, a])!r},{float(self.d[s, z, a])!r}\n"
                    )
        return buf.getvalue()


def _solve_linear(P: np.ndarray, b: np.ndarray, gamma: float, tol: float) -> np.ndarray:
    """x = b + gamma P x, solved directly at desk scale, iteratively beyond."""
    n = P.shape[0]
    if n <= _DIRECT_SOLVE_LIMIT:
        return np.linalg.solve(np.eye(n) - gamma * P, b)
    x = np.zeros(n)
    while True:
        x2 = b + gamma * (P @ x)
        if np.max(np.abs(x2 - x)) * gamma / (1.0 - gamma) <= tol:
            return x2
        x = x2


def policy_evaluate(
    chain: ProductChain,
    rule: DecisionRule,
    xi1: np.ndarray,
    gamma: float,
    tol: float = 1e-12,
) -> EvalBundle:
    """Exact evaluation of a stationary rule on the product chain.

    xi1 is the joint initial distribution over (s, z), shape (S, Z).
    """
    S, Z, A = chain.n_states, chain.n_agent_states, chain.n_actions
    n = S * Z
    xi1 = np.asarray(xi1, dtype=float).reshape(S, Z)
    probs = rule.probs
    # P_pi[(s,z),(s2,z2)] and r_pi[(s,z)]
    P_pi = np.einsum("za,szaxw->szxw", probs, chain.kernel).reshape(n, n)
    r_pi = (probs[None, :, :] * chain.reward[:, None, :]).sum(axis=2).reshape(n)
    v = _solve_linear(P_pi, r_pi, gamma, tol)
    q = chain.reward[:, None, :] + gamma * np.einsum(
        "szaxw,xw->sza", chain.kernel, v.reshape(S, Z)
    )
    occ = _solve_linear(P_pi.T, xi1.reshape(n), gamma, tol)
    d = occ.reshape(S, Z)[:, :, None] * probs[None, :, :]
    j = float(xi1.reshape(n) @ v)
    return EvalBundle(v.reshape(S, Z), q, d, j)


@dataclass(frozen=True)
class PerformanceResult:
    value: float
    radius: float  # certified half-width; 0 for exact stationary evaluation

    def interval(self):
        return (self.value - self.radius, self.value + self.radius)


def performance(
    model: PomdpModel,
    m: AgentStateMachine,
    policy: Policy,
    horizon_tol: float = 1e-9,
) -> PerformanceResult:
    """Discounted performance of any policy.

    Stationary policies are evaluated exactly; non-stationary ones by a
    forward rollout of the joint (s, z) distribution with a certified
    geometric tail bound of at most horizon_tol.
    """
    from .designer import xi_init, xi_reward, xi_update

    if policy.is_stationary:
        chain = build_product_chain(model, m)
        xi = xi_init(model, m)
        bundle = policy_evaluate(chain, policy.tail, xi.dist, model.gamma)
        return PerformanceResult(bundle.j, 0.0)
    gamma, r_max = model.gamma, model.r_max
    if r_max == 0.0:
        return PerformanceResult(0.0, 0.0)
    T = max(1, int(np.ceil(np.log(horizon_tol * (1.0 - gamma) / r_max) / np.log(gamma))))
    xi = xi_init(model, m)
    total = 0.0
    disc = 1.0
    for t in range(T):
        rule = policy.rule_at(t)
        total += disc * xi_reward(xi, rule, model.reward)
        xi = xi_update(model, m, xi, rule)
        disc *= gamma
    tail = disc * r_max / (1.0 - gamma)
    return PerformanceResult(total, tail)


@dataclass(frozen=True)
class StationaryDist:
    """Stationary distribution of the (s, y, z, a) chain under one rule.

    When the reachable chain is periodic, zeta is the Cesaro-average
    (time-average) distribution and `aperiodic` is False; `a1_ok` requires a
    single reachable closed class covering the reachable set, aperiodicity,
    and positive mass on every (z, a) cell.
    """

    zeta: np.ndarray  # (S, Y, Z, A)
    irreducible: bool
    aperiodic: bool
    period: int
    a1_ok: bool

    def marginal_za(self) -> np.ndarray:
        return self.zeta.sum(axis=(0, 1))

    def cond_s_given_za(self) -> np.ndarray:
        """zeta(s | z, a), shape (Z, A, S); rows of unvisited cells are zero."""
        za = self.marginal_za()
        szas = self.zeta.sum(axis=1)  # (S, Z, A)
        out = np.zeros((za.shape[0], za.shape[1], szas.shape[0]))
        for z in range(za.shape[0]):
            for a in range(za.shape[1]):
                if za[z, a] > 0.0:
                    out[z, a] = szas[:, z, a] / za[z, a]
        return out


def _chain_period(adj_lists, nodes) -> int:
    """Period of a strongly connected directed graph via BFS level gcd."""
    import math as _math

    start = nodes[0]
    level = {start: 0}
    queue = [start]
    g = 0
    while queue:
        u = queue.pop()
        for v in adj_lists[u]:
            if v not in level:
                level[v] = level[u] + 1
                queue.append(v)
            else:
                g = _math.gcd(g, level[u] + 1 - level[v])
    return abs(g) if g != 0 else 1


def stationary_dist(
    model: PomdpModel, m: AgentStateMachine, rule: DecisionRule
) -> StationaryDist:
    """Solve zeta = zeta P on the closed class reached from the initial
    distribution of the (s, y, z, a) chain."""
    S, Y, Z, A = model.n_states, model.n_obs, m.n_agent_states, model.n_actions
    n = S * Y * Z * A
    if n > capacity_cap(250_000):
        raise CapacityError(f"(s,y,z,a) chain has {n} states")

    def idx(s, y, z, a0):
        return ((s * Y + y) * Z + z) * A + a0

    probs = rule.probs
    P = np.zeros((n, n))
    for s in range(S):
        for a in range(A):
            for z in range(Z):
                # the current observation does not affect the transition
                rows = [idx(s, y, z, a) for y in range(Y)]
                for s2 in range(S):
                    for y2 in range(Y):
                        p = model.kernel[s, a, s2, y2]
                        if p == 0.0:
                            continue
                        z2 = m.update_fn[z, y2, a]
                        c0 = idx(s2, y2, z2, 0)
                        for row in rows:
                            P[row, c0:c0 + A] += p * probs[z2]
    # initial distribution support
    x0 = np.zeros(n)
    for s in range(S):
        for y in range(Y):
            w = model.init_state[s] * model.init_obs[s, y]
            if w == 0.0:
                continue
            z = m.init_fn[y]
            c0 = idx(s, y, z, 0)
            x0[c0:c0 + A] += w * probs[z]
    # reachable set
    sparse = csr_matrix(P > 0.0)
    reach_mask = np.zeros(n, dtype=bool)
    frontier = list(np.flatnonzero(x0 > 0.0))
    for u in frontier:
        reach_mask[u] = True
    while frontier:
        u = frontier.pop()
        for v in sparse.indices[sparse.indptr[u]:sparse.indptr[u + 1]]:
            if not reach_mask[v]:
                reach_mask[v] = True
                frontier.append(v)
    reach = np.flatnonzero(reach_mask)
    sub = P[np.ix_(reach, reach)]
    n_r = reach.shape[0]
    n_comp, labels = csgraph.connected_components(
        csr_matrix(sub > 0.0), directed=True, connection="strong"
    )
    closed = []
    for c in range(n_comp):
        members = np.flatnonzero(labels == c)
        outgoing = sub[members, :].sum(axis=1) - sub[np.ix_(members, members)].sum(axis=1)
        if np.all(np.asarray(outgoing).ravel() < 1e-14):
            closed.append(members)
    if len(closed) != 1:
        raise AmbiguousChainError([reach[c].tolist() for c in closed])
    members = closed[0]
    C = sub[np.ix_(members, members)]
    k = members.shape[0]
    # zeta C = zeta with sum 1
    Amat = C.T - np.eye(k)
    Amat[-1, :] = 1.0
    b = np.zeros(k)
    b[-1] = 1.0
    zeta_c = np.linalg.solve(Amat, b)
    zeta_c = np.clip(zeta_c, 0.0, None)
    zeta_c /= zeta_c.sum()
    adj = [list(np.flatnonzero(C[i] > 0.0)) for i in range(k)]
    period = _chain_period(adj, list(range(k)))
    aperiodic = period == 1
    irreducible = k == n_r
    zeta = np.zeros(n)
    zeta[reach[members]] = zeta_c
    zeta = zeta.reshape(S, Y, Z, A)
    a1_ok = bool(irreducible and aperiodic and np.all(zeta.sum(axis=(0, 1)) > 0.0))
    return StationaryDist(zeta, irreducible, aperiodic, period, a1_ok)


def monte_carlo_J(
    model: PomdpModel,
    m: AgentStateMachine,
    policy: Policy,
    episodes: int,
    horizon: int,
    rng_or_seed,
) -> tuple:
    """Truncated-return estimate and half-width of its 95% CI."""
    seed = (
        int(rng_or_seed.integers(0, 2**31 - 1))
        if isinstance(rng_or_seed, np.random.Generator)
        else int(rng_or_seed)
    )
    prefix = [r.probs for r in policy.rules]
    cdf = _kernels.rule_cdf(np.stack(prefix + [policy.tail.probs]))
    returns = _kernels.mc_returns(
        seed,
        episodes,
        horizon,
        model.gamma,
        np.cumsum(model.init_state),
        np.cumsum(model.init_obs, axis=1),
        _kernels.joint_cdf_table(model),
        model.n_obs,
        model.reward,
        m.init_fn,
        m.update_fn,
        cdf,
        len(prefix),
    )
    est = float(np.mean(returns))
    half = float(1.96 * np.std(returns, ddof=1) / np.sqrt(episodes)) if episodes > 1 else np.inf
    return est, half
