"""Enumeration and search oracles for the agent-state policy-class values
(stationary/non-stationary, deterministic/stochastic) and the history-policy
reference value, with the ordering checks between them."""

from __future__ import annotations

import io
import itertools
from dataclasses import dataclass, field

import numpy as np

from .core import (
    AgentStateMachine,
    DecisionRule,
    PomdpModel,
    belief_lattice,
    enumerate_deterministic_rules,
)
from .designer import MetaPlan, plan_designer, xi_init
from .errors import CapacityError, ValidationError, capacity_cap
from .evaluate import build_product_chain, policy_evaluate

_BKEY_DECIMALS = 12


def enumerate_stationary_det(
    model: PomdpModel, m: AgentStateMachine, cap: int = None
) -> tuple:
    """Exact max over all deterministic stationary rules; returns
    (best rule, value)."""
    chain = build_product_chain(model, m)
    xi = xi_init(model, m).dist
    best_rule, best_j = None, -np.inf
    for rule in enumerate_deterministic_rules(m.n_agent_states, model.n_actions, cap=cap):
        j = policy_evaluate(chain, rule, xi, model.gamma).j
        if j > best_j:
            best_rule, best_j = rule, j
    return best_rule, float(best_j)


def search_nonstationary_det(model: PomdpModel, m: AgentStateMachine, tol: float) -> tuple:
    """Certified interval for the non-stationary deterministic optimum;
    returns (plan, (lo, hi)) with hi - lo <= tol."""
    plan = plan_designer(model, m, tol, rule_class="deterministic")
    return plan, (plan.value_lo, plan.value_hi)


@dataclass(frozen=True)
class GridSearchResult:
    rule: DecisionRule
    value: float
    resolution: float
    n_points: int
    note: str = "grid maximum; true stationary-stochastic optimum may exceed it by the grid gap"


def grid_search_stationary_stoch(
    model: PomdpModel, m: AgentStateMachine, resolution: float, cap: int = None
) -> GridSearchResult:
    """Exact evaluation over a simplex grid of stochastic rules.

    The grid contains every deterministic rule (the simplex corners), so the
    result is always at least the deterministic stationary optimum.
    """
    Z, A = m.n_agent_states, model.n_actions
    if Z * (A - 1) > 6:
        raise ValidationError(
            f"grid search limited to 6 free dimensions, got {Z * (A - 1)}"
        )
    k = int(round(1.0 / resolution))
    if k < 1 or abs(k * resolution - 1.0) > 1e-9:
        raise ValidationError("resolution must be 1/k for an integer k")
    simplex = belief_lattice(A, k)  # all action distributions at this step
    n_points = simplex.shape[0] ** Z
    cap = capacity_cap(10**6) if cap is None else cap
    if n_points > cap:
        raise CapacityError(f"grid has {n_points} points, cap is {cap}")
    chain = build_product_chain(model, m)
    xi = xi_init(model, m).dist
    best_rule, best_j = None, -np.inf
    for combo in itertools.product(range(simplex.shape[0]), repeat=Z):
        rule = DecisionRule.stochastic(simplex[list(combo)])
        j = policy_evaluate(chain, rule, xi, model.gamma).j
        if j > best_j:
            best_rule, best_j = rule, j
    return GridSearchResult(best_rule, float(best_j), resolution, n_points)


@dataclass(frozen=True)
class HistoryDpResult:
    """Certified interval for the history-policy optimum.

    lo is the exact value of an implementable policy (backward-induction
    actions for T steps, then the best constant action from each leaf
    belief); hi adds the geometric tail to the exact T-horizon optimum.
    """

    lo: float
    hi: float
    horizon: int
    n_nodes: int

    @property
    def width(self) -> float:
        return self.hi - self.lo


def history_dp(
    model: PomdpModel, horizon: int, tol: float = 0.0, cap: int = None
) -> HistoryDpResult:
    """Backward induction on the exact belief tree with node merging.

    The depth is `horizon`, shortened when the geometric tail already meets
    tol earlier.
    """
    gamma, r_max = model.gamma, model.r_max
    T = horizon
    if tol > 0.0 and r_max > 0.0:
        needed = int(np.ceil(np.log(tol * (1.0 - gamma) / r_max) / np.log(gamma)))
        T = max(1, min(horizon, needed))
    cap = capacity_cap(10**6) if cap is None else cap
    S, A, Y = model.n_states, model.n_actions, model.n_obs
    # exact tail values of each constant action: V_a = (I - g P_a)^-1 r_a
    state_kernel = model.state_kernel()
    const_v = np.empty((A, S))
    for a in range(A):
        const_v[a] = np.linalg.solve(
            np.eye(S) - gamma * state_kernel[:, a, :], model.reward[:, a]
        )
    memo = {}
    n_nodes = 0
    kernel_flat = model.kernel.reshape(S, A * S * Y)

    def value(t, b):
        nonlocal n_nodes
        key = (t, np.round(b, _BKEY_DECIMALS).tobytes())
        hit = memo.get(key)
        if hit is not None:
            return hit
        n_nodes += 1
        if n_nodes > cap:
            raise CapacityError(f"belief tree exceeded {cap} nodes")
        if t == T:
            out = (0.0, float(np.max(const_v @ b)))
            memo[key] = out
            return out
        joint = (b @ kernel_flat).reshape(A, S, Y)
        py = joint.sum(axis=1)  # (a, y2)
        base = b @ model.reward  # (a,)
        best0 = -np.inf
        best_ext = -np.inf
        for a in range(A):
            q0 = float(base[a])
            q_ext = q0
            for y2 in range(Y):
                p = py[a, y2]
                if p <= 0.0:
                    continue
                child0, child_ext = value(t + 1, joint[a, :, y2] / p)
                q0 += gamma * p * child0
                q_ext += gamma * p * child_ext
            best0 = max(best0, q0)
            best_ext = max(best_ext, q_ext)
        out = (best0, best_ext)
        memo[key] = out
        return out

    j0 = 0.0
    j_ext = 0.0
    for y in range(Y):
        post = model.init_state * model.init_obs[:, y]
        p_y = post.sum()
        if p_y <= 0.0:
            continue
        v0, v_ext = value(0, post / p_y)
        j0 += p_y * v0
        j_ext += p_y * v_ext
    tail = gamma**T * r_max / (1.0 - gamma)
    lo = max(j_ext, j0 - tail)
    return HistoryDpResult(float(lo), float(j0 + tail), T, n_nodes)


@dataclass(frozen=True)
class OrderingCheck:
    name: str
    lhs: float
    rhs: float
    slack: float

    @property
    def ok(self) -> bool:
        return self.lhs <= self.rhs + self.slack

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


@dataclass(frozen=True)
class OrderingBudgets:
    designer_tol: float = 1e-3
    history_horizon: int = 60
    history_tol: float = 1e-3
    grid_resolution: float = 0.05
    slack: float = 1e-9


@dataclass(frozen=True)
class ClassReport:
    """Policy-class values and the inequality checks between them.

    The non-stationary stochastic value equals the deterministic one (the
    stagewise objective is bilinear in the rule), so j_zns reuses the j_znd
    interval rather than a separate search.
    """

    j_zsd: float
    j_znd: tuple  # (lo, hi)
    j_zss: float
    j_zss_method: str
    j_zns: tuple
    j_hnd: tuple
    orderings: tuple = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.orderings)

    @property
    def violations(self) -> tuple:
        return tuple(c for c in self.orderings if not c.ok)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("quantity,lo,hi\n")
        buf.write(f"J_ZSD,{self.j_zsd!r},{self.j_zsd!r}\n")
        buf.write(f"J_ZND,{self.j_znd[0]!r},{self.j_znd[1]!r}\n")
        buf.write(f"J_ZSS({self.j_zss_method}),{self.j_zss!r},{self.j_zss!r}\n")
        buf.write(f"J_ZNS,{self.j_zns[0]!r},{self.j_zns[1]!r}\n")
        buf.write(f"J_HND,{self.j_hnd[0]!r},{self.j_hnd[1]!r}\n")
        buf.write("check,lhs,rhs,slack,ok\n")
        for c in self.orderings:
            buf.write(f"{c.name},{c.lhs!r},{c.rhs!r},{c.slack!r},{c.ok}\n")
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [
            f"J_ZSD = {self.j_zsd:.6f}",
            f"J_ZND in [{self.j_znd[0]:.6f}, {self.j_znd[1]:.6f}]",
            f"J_ZSS = {self.j_zss:.6f} ({self.j_zss_method})",
            f"J_ZNS in [{self.j_zns[0]:.6f}, {self.j_zns[1]:.6f}] (= J_ZND)",
            f"J_HND in [{self.j_hnd[0]:.6f}, {self.j_hnd[1]:.6f}]",
        ]
        for c in self.orderings:
            status = "ok" if c.ok else "VIOLATED"
            lines.append(f"{c.name}: {c.lhs:.6f} <= {c.rhs:.6f} (+{c.slack:g})  [{status}]")
        return "\n".join(lines) + "\n"


def verify_ordering(
    model: PomdpModel, m: AgentStateMachine, budgets: OrderingBudgets = OrderingBudgets()
) -> ClassReport:
    """Compute every class value within its budget and check the chain of
    inequalities between them at the stated slack."""
    _, j_zsd = enumerate_stationary_det(model, m)
    _, znd = search_nonstationary_det(model, m, budgets.designer_tol)
    grid = grid_search_stationary_stoch(model, m, budgets.grid_resolution)
    hnd = history_dp(model, budgets.history_horizon, budgets.history_tol)
    s = budgets.slack
    checks = (
        OrderingCheck("J_ZSD <= J_ZND", j_zsd, znd[1], s),
        OrderingCheck("J_ZND <= J_HND", znd[0], hnd.hi, s),
        OrderingCheck("J_ZSD <= J_ZSS", j_zsd, grid.value, s),
        OrderingCheck("J_ZSS <= J_ZNS", grid.value, znd[1], s),
    )
    return ClassReport(
        j_zsd=j_zsd,
        j_znd=znd,
        j_zss=grid.value,
        j_zss_method="grid",
        j_zns=znd,
        j_hnd=(hnd.lo, hnd.hi),
        orderings=checks,
    )
