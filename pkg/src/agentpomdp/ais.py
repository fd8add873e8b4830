"""Information-state verification, integral probability metrics, posited
agent-state models with their approximation losses, and the resulting
suboptimality bound for the greedy agent-state policy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .core import AgentStateMachine, DecisionRule, PomdpModel
from .errors import CapacityError, ValidationError, capacity_cap
from .evaluate import StationaryDist, stationary_dist

_DEDUP_DECIMALS = 12


@dataclass(frozen=True)
class IPMSpec:
    """Metric choice on distributions over agent states.

    kind "tv": the sup over functions with span at most 1, which equals
    half the l1 distance; this is exactly the Wasserstein distance under
    the unit discrete ground metric, and the matching Minkowski functional
    is the full span.  kind "wasserstein": sup over 1-Lipschitz functions
    with respect to the supplied ground metric, computed as an exact
    transportation linear program.
    """

    kind: str
    metric: np.ndarray = None  # (Z, Z) ground metric, wasserstein only

    def __post_init__(self):
        if self.kind not in ("tv", "wasserstein"):
            raise ValidationError(f"unknown IPM kind {self.kind!r}")
        if self.kind == "wasserstein":
            if self.metric is None:
                raise ValidationError("wasserstein IPM needs a ground metric")
            d = np.asarray(self.metric, dtype=float)
            object.__setattr__(self, "metric", d)
            if d.ndim != 2 or d.shape[0] != d.shape[1]:
                raise ValidationError("ground metric must be square")
            if np.any(d < 0) or np.any(np.abs(np.diag(d)) > 1e-12):
                raise ValidationError("ground metric must be nonnegative with zero diagonal")
            if not np.allclose(d, d.T, atol=1e-12):
                raise ValidationError("ground metric must be symmetric")
            n = d.shape[0]
            if n > 1 and d[~np.eye(n, dtype=bool)].min() <= 0:
                raise ValidationError("distinct points need positive distance")
            # d[i,k] <= d[i,j] + d[j,k]
            if np.any(d[:, None, :] > d[:, :, None] + d[None, :, :] + 1e-12):
                raise ValidationError("ground metric violates the triangle inequality")

    @classmethod
    def total_variation(cls) -> "IPMSpec":
        return cls(kind="tv")

    @classmethod
    def wasserstein(cls, metric) -> "IPMSpec":
        return cls(kind="wasserstein", metric=metric)

    def diameter(self, n_points: int) -> float:
        """Largest possible distance between two distributions."""
        if self.kind == "tv":
            return 1.0
        return float(self.metric.max()) if n_points > 1 else 0.0


def ipm_distance(spec: IPMSpec, nu1, nu2) -> float:
    nu1 = np.asarray(nu1, dtype=float)
    nu2 = np.asarray(nu2, dtype=float)
    for nu in (nu1, nu2):
        if abs(nu.sum() - 1.0) > 1e-9 or nu.min() < -1e-12:
            raise ValidationError("IPM arguments must be distributions")
    if spec.kind == "tv":
        return 0.5 * float(np.abs(nu1 - nu2).sum())
    return _transport_cost(spec.metric, nu1, nu2)


def _transport_cost(metric: np.ndarray, nu1: np.ndarray, nu2: np.ndarray) -> float:
    """Optimal transport cost between finite distributions (exact LP)."""
    n = metric.shape[0]
    if n == 1:
        return 0.0
    # variables x[i, j] >= 0; row sums nu1, column sums nu2 (one redundant
    # equality dropped for numerical stability)
    A_eq = []
    b_eq = []
    for i in range(n):
        row = np.zeros((n, n))
        row[i, :] = 1.0
        A_eq.append(row.ravel())
        b_eq.append(nu1[i])
    for j in range(n - 1):
        col = np.zeros((n, n))
        col[:, j] = 1.0
        A_eq.append(col.ravel())
        b_eq.append(nu2[j])
    res = linprog(
        metric.ravel(),
        A_eq=np.array(A_eq),
        b_eq=np.array(b_eq),
        bounds=(0, None),
        method="highs",
    )
    if not res.success:
        raise ValidationError(f"transport LP failed: {res.message}")
    return float(res.fun)


def minkowski_norm(spec: IPMSpec, f) -> float:
    """Smallest scale at which f joins the metric's test-function class:
    the span for the tv kind (whose class is the span-at-most-1 ball), the
    Lipschitz constant for wasserstein."""
    f = np.asarray(f, dtype=float)
    if spec.kind == "tv":
        return float(f.max() - f.min())
    num = np.abs(f[:, None] - f[None, :])
    mask = spec.metric > 0
    if not mask.any():
        return 0.0
    return float(np.max(num[mask] / spec.metric[mask]))


@dataclass(frozen=True)
class AISModel:
    """Posited agent-state dynamics and rewards."""

    p_ais: np.ndarray  # (Z, A, Z)
    r_ais: np.ndarray  # (Z, A)
    unvisited: np.ndarray = None  # bool (Z, A); cells filled by convention

    def __post_init__(self):
        p = np.asarray(self.p_ais, dtype=float)
        r = np.asarray(self.r_ais, dtype=float)
        object.__setattr__(self, "p_ais", p)
        object.__setattr__(self, "r_ais", r)
        if p.ndim != 3 or p.shape[0] != p.shape[2] or r.shape != p.shape[:2]:
            raise ValidationError("AIS tables must be (Z, A, Z) and (Z, A)")
        if np.any(p < -1e-12) or not np.allclose(p.sum(axis=2), 1.0, atol=1e-12):
            raise ValidationError("AIS transition rows must be distributions")
        if self.unvisited is None:
            object.__setattr__(self, "unvisited", np.zeros(r.shape, dtype=bool))

    @property
    def n_agent_states(self) -> int:
        return self.p_ais.shape[0]

    @property
    def n_actions(self) -> int:
        return self.p_ais.shape[1]


# ---------------------------------------------------------------------------
# History enumeration: nodes are (agent state, conditional state belief)
# ---------------------------------------------------------------------------


class _HistoryNode:
    __slots__ = ("z", "belief")

    def __init__(self, z, belief):
        self.z = z
        self.belief = belief


def _enumerate_history_levels(model, m, horizon, cap):
    """Level t holds the distinct (z, P(s | h)) pairs over positive-probability
    histories of length t+1.  Merging identical pairs is lossless for every
    per-history statistic computed downstream."""
    levels = []
    seen = {}
    first = []
    for y in range(model.n_obs):
        post = model.init_state * model.init_obs[:, y]
        total = post.sum()
        if total <= 0.0:
            continue
        b = post / total
        key = (int(m.init_fn[y]), np.round(b, _DEDUP_DECIMALS).tobytes())
        if key not in seen:
            seen[key] = True
            first.append(_HistoryNode(int(m.init_fn[y]), b))
    levels.append(first)
    count = len(first)
    for _ in range(1, horizon):
        nxt = []
        seen = {}
        for node in levels[-1]:
            for a in range(model.n_actions):
                joint = np.einsum("s,sxy->xy", node.belief, model.kernel[:, a])
                for y2 in range(model.n_obs):
                    total = joint[:, y2].sum()
                    if total <= 0.0:
                        continue
                    b2 = joint[:, y2] / total
                    z2 = int(m.update_fn[node.z, y2, a])
                    key = (z2, np.round(b2, _DEDUP_DECIMALS).tobytes())
                    if key not in seen:
                        seen[key] = True
                        nxt.append(_HistoryNode(z2, b2))
                        count += 1
                        if count > cap:
                            raise CapacityError(
                                f"history enumeration exceeded {cap} nodes"
                            )
        levels.append(nxt)
    return levels


def _node_predictions(model, m, node, a):
    """(expected reward, next-z distribution, next-y distribution) given the
    node's conditional state belief and an action."""
    e_r = float(node.belief @ model.reward[:, a])
    joint = np.einsum("s,sxy->y", node.belief, model.kernel[:, a])  # P(y2 | h, a)
    pz = np.zeros(m.n_agent_states)
    for y2 in range(model.n_obs):
        pz[m.update_fn[node.z, y2, a]] += joint[y2]
    return e_r, pz, joint


@dataclass(frozen=True)
class InfoStateReport:
    p1_residual: float
    p2_residual: float
    p2b_residual: float
    is_info_state: bool
    horizon: int
    n_histories: int


def check_information_state(
    model: PomdpModel,
    m: AgentStateMachine,
    horizon: int,
    tol: float = 1e-9,
    cap: int = None,
) -> InfoStateReport:
    """Residuals of the two information-state properties over all
    positive-probability histories up to the horizon.

    For each (z, a) reached by at least two distinct histories, the reward
    residual is the spread of E[R | h, a] and the prediction residuals are
    the largest pairwise total-variation spreads of the next agent-state and
    next observation laws.
    """
    cap = capacity_cap(10**6) if cap is None else cap
    levels = _enumerate_history_levels(model, m, horizon, cap)
    groups = {}
    n_hist = 0
    for level in levels:
        for node in level:
            n_hist += 1
            for a in range(model.n_actions):
                groups.setdefault((node.z, a), []).append(
                    _node_predictions(model, m, node, a)
                )
    p1 = p2 = p2b = 0.0
    for stats in groups.values():
        if len(stats) < 2:
            continue
        rewards = [s[0] for s in stats]
        p1 = max(p1, max(rewards) - min(rewards))
        for i in range(len(stats)):
            for j in range(i + 1, len(stats)):
                p2 = max(p2, 0.5 * float(np.abs(stats[i][1] - stats[j][1]).sum()))
                p2b = max(p2b, 0.5 * float(np.abs(stats[i][2] - stats[j][2]).sum()))
    return InfoStateReport(p1, p2, p2b, bool(max(p1, p2, p2b) <= tol), horizon, n_hist)


@dataclass(frozen=True)
class AISLossReport:
    """Per-step and discounted-aggregate approximation losses.

    eps_t / delta_t are exact maxima over enumerated histories for
    t = 1..T; beyond T the aggregates use the conservative reward-spread
    and metric-diameter tails, so the reported bound is sound for the
    infinite horizon.
    """

    eps_t: np.ndarray
    delta_t: np.ndarray
    eps: float
    delta: float
    eps_tail: float
    delta_tail: float
    bound: float
    horizon: int
    gamma: float

    def to_csv(self) -> str:
        lines = ["t,eps_t,delta_t"]
        for t in range(self.horizon):
            lines.append(f"{t + 1},{float(self.eps_t[t])!r},{float(self.delta_t[t])!r}")
        lines.append(f"aggregate,{self.eps!r},{self.delta!r}")
        lines.append(f"bound,{self.bound!r},")
        return "\n".join(lines) + "\n"


def compute_ais_losses(
    model: PomdpModel,
    m: AgentStateMachine,
    ais: AISModel,
    spec: IPMSpec,
    horizon: int,
    cap: int = None,
) -> AISLossReport:
    """Exact per-step losses of a posited (P, r) pair against the model,
    aggregated with conservative tails beyond the horizon."""
    cap = capacity_cap(10**6) if cap is None else cap
    levels = _enumerate_history_levels(model, m, horizon, cap)
    gamma = model.gamma
    eps_t = np.zeros(horizon)
    delta_t = np.zeros(horizon)
    for t, level in enumerate(levels):
        for node in level:
            for a in range(model.n_actions):
                e_r, pz, _ = _node_predictions(model, m, node, a)
                eps_t[t] = max(eps_t[t], abs(e_r - ais.r_ais[node.z, a]))
                delta_t[t] = max(
                    delta_t[t], ipm_distance(spec, pz, ais.p_ais[node.z, a])
                )
    eps_tail = model.r_max + float(np.abs(ais.r_ais).max())
    delta_tail = spec.diameter(m.n_agent_states)
    gpow = gamma ** np.arange(horizon)
    eps = float((1.0 - gamma) * (gpow @ eps_t) + gamma**horizon * eps_tail)
    delta = float((1.0 - gamma) * (gpow @ delta_t) + gamma**horizon * delta_tail)
    sol = solve_ais_dp(ais, gamma)
    bound = (2.0 / (1.0 - gamma)) * (eps + gamma * delta * minkowski_norm(spec, sol.v))
    return AISLossReport(
        eps_t, delta_t, eps, delta, eps_tail, delta_tail, float(bound), horizon, gamma
    )


@dataclass(frozen=True)
class AISSolution:
    q: np.ndarray  # (Z, A)
    v: np.ndarray  # (Z,)
    rule: DecisionRule  # greedy, lowest action index on ties


def solve_ais_dp(ais: AISModel, gamma: float, tol: float = 1e-10) -> AISSolution:
    """Value iteration on the posited model to a fixed-point residual of at
    most tol."""
    v = np.zeros(ais.n_agent_states)
    stop = tol * (1.0 - gamma) / (2.0 * gamma) if gamma > 0 else tol
    while True:
        q = ais.r_ais + gamma * np.einsum("zaw,w->za", ais.p_ais, v)
        v2 = q.max(axis=1)
        if np.max(np.abs(v2 - v)) <= stop:
            v = v2
            break
        v = v2
    q = ais.r_ais + gamma * np.einsum("zaw,w->za", ais.p_ais, v)
    greedy = np.argmax(q, axis=1)
    return AISSolution(q, q.max(axis=1), DecisionRule.deterministic(greedy, ais.n_actions))


def suboptimality_bound(report: AISLossReport, spec: IPMSpec, v_ais, gamma: float) -> float:
    """2 / (1 - gamma) * (eps + gamma * delta * rho(V))."""
    return float(
        (2.0 / (1.0 - gamma))
        * (report.eps + gamma * report.delta * minkowski_norm(spec, v_ais))
    )


def fit_ais(
    model: PomdpModel,
    m: AgentStateMachine,
    mu: DecisionRule,
    statdist: StationaryDist = None,
) -> AISModel:
    """Conditional-expectation agent-state model under the occupancy of mu:
    r(z, a) = E[r(S, a) | z, a] and the matching next-z kernel.

    Cells never visited under mu are filled with a uniform transition and
    zero reward and flagged in `unvisited`.
    """
    sd = stationary_dist(model, m, mu) if statdist is None else statdist
    cond = sd.cond_s_given_za()  # (Z, A, S)
    za = sd.marginal_za()
    Z, A = m.n_agent_states, model.n_actions
    obs_kernel = model.obs_kernel()  # (S, A, Y)
    r_ais = np.zeros((Z, A))
    p_ais = np.zeros((Z, A, Z))
    unvisited = np.zeros((Z, A), dtype=bool)
    for z in range(Z):
        for a in range(A):
            if za[z, a] <= 0.0:
                unvisited[z, a] = True
                p_ais[z, a] = 1.0 / Z
                continue
            r_ais[z, a] = float(cond[z, a] @ model.reward[:, a])
            py = cond[z, a] @ obs_kernel[:, a, :]  # P(y2 | z, a)
            for y2 in range(model.n_obs):
                p_ais[z, a, m.update_fn[z, y2, a]] += py[y2]
    return AISModel(p_ais, r_ais, unvisited)
