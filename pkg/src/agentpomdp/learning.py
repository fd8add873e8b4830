"""Tabular agent-state Q-learning and on-policy TD evaluation along a single
continuing trajectory, plus the closed-form fixed points the iterates
converge to (built from the stationary distribution of the behavior
policy)."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .ais import AISModel, fit_ais, solve_ais_dp
from .core import AgentStateMachine, DecisionRule, PomdpModel
from .errors import ValidationError
from .evaluate import stationary_dist


@dataclass(frozen=True)
class LearningConfig:
    """Single-trajectory run configuration.

    The per-cell learning rate is 1 / (1 + visits(z, a))^lr_exponent; any
    exponent in (0.5, 1] keeps the per-cell schedule square-summable but not
    summable.
    """

    steps: int
    lr_exponent: float = 0.85
    seed: int = 0
    eval_stride: int = 10_000
    q_init: float = 0.0

    def __post_init__(self):
        if not (0.5 < self.lr_exponent <= 1.0):
            raise ValidationError("lr_exponent must lie in (0.5, 1]")
        if self.steps < 1 or self.eval_stride < 1:
            raise ValidationError("steps and eval_stride must be positive")


@dataclass(frozen=True)
class LearningRun:
    """Q snapshots along one trajectory; snapshot k was taken after
    steps_at[k] updates."""

    steps_at: np.ndarray
    snapshots: np.ndarray  # (n_snap, Z, A)
    q: np.ndarray  # final table
    visits: np.ndarray  # (Z, A) int

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("step,z,a,q\n")
        n, Z, A = self.snapshots.shape
        for k in range(n):
            for z in range(Z):
                for a in range(A):
                    buf.write(f"{self.steps_at[k]},{z},{a},{float(self.snapshots[k, z, a])!r}\n")
        return buf.getvalue()

    def distances_to(self, target: np.ndarray) -> np.ndarray:
        return np.max(np.abs(self.snapshots - target[None, :, :]), axis=(1, 2))


def _sim_tables(model: PomdpModel, m: AgentStateMachine, rule: DecisionRule):
    return (
        np.cumsum(model.init_state),
        np.cumsum(model.init_obs, axis=1),
        _kernels.joint_cdf_table(model),
        model.n_obs,
        model.reward,
        m.init_fn,
        m.update_fn,
        _kernels.rule_cdf(rule.probs),
    )


def _check_exploring(rule: DecisionRule, what: str):
    if np.any(rule.probs <= 0.0):
        raise ValidationError(
            f"{what} must give every action positive probability in every agent state"
        )


def asql_run(
    model: PomdpModel, m: AgentStateMachine, mu: DecisionRule, cfg: LearningConfig
) -> LearningRun:
    """Q-learning driven by the agent state under behavior rule mu."""
    _check_exploring(mu, "behavior rule")
    init_cdf, obs_cdf, joint_cdf, n_obs, reward, phi0, phi, mu_cdf = _sim_tables(model, m, mu)
    q0 = np.full((m.n_agent_states, model.n_actions), cfg.q_init)
    steps_at, snaps, q, visits = _kernels.asql_trajectory(
        cfg.seed, cfg.steps, model.gamma, cfg.lr_exponent,
        init_cdf, obs_cdf, joint_cdf, n_obs, reward, phi0, phi, mu_cdf,
        q0, cfg.eval_stride,
    )
    return LearningRun(steps_at, snaps, q, visits)


def asac_td_run(
    model: PomdpModel, m: AgentStateMachine, pi: DecisionRule, cfg: LearningConfig
) -> LearningRun:
    """On-policy SARSA-style evaluation of rule pi along one trajectory."""
    init_cdf, obs_cdf, joint_cdf, n_obs, reward, phi0, phi, pi_cdf = _sim_tables(model, m, pi)
    q0 = np.full((m.n_agent_states, model.n_actions), cfg.q_init)
    steps_at, snaps, q, visits = _kernels.sarsa_trajectory(
        cfg.seed, cfg.steps, model.gamma, cfg.lr_exponent,
        init_cdf, obs_cdf, joint_cdf, n_obs, reward, phi0, phi, pi_cdf,
        q0, cfg.eval_stride,
    )
    return LearningRun(steps_at, snaps, q, visits)


@dataclass(frozen=True)
class FixedPointResult:
    q: np.ndarray  # (Z, A)
    a1_ok: bool  # irreducible + aperiodic + full (z, a) coverage
    aperiodic: bool
    residual: float


def _fitted_or_raise(model, m, rule) -> tuple:
    sd = stationary_dist(model, m, rule)
    ais = fit_ais(model, m, rule, statdist=sd)
    if ais.unvisited.any():
        z, a = np.argwhere(ais.unvisited)[0]
        raise ValidationError(
            f"cell (z={z}, a={a}) has zero visitation under the behavior rule"
        )
    return sd, ais


def asql_fixed_point(
    model: PomdpModel, m: AgentStateMachine, mu: DecisionRule, tol: float = 1e-12
) -> FixedPointResult:
    """Limit of the Q-learning iterates: the max-form fixed point of the
    conditional-expectation model under mu's stationary distribution."""
    sd, ais = _fitted_or_raise(model, m, mu)
    sol = solve_ais_dp(ais, model.gamma, tol=tol)
    residual = _max_form_residual(ais, model.gamma, sol.q)
    return FixedPointResult(sol.q, sd.a1_ok, sd.aperiodic, residual)


def _max_form_residual(ais: AISModel, gamma: float, q: np.ndarray) -> float:
    t = ais.r_ais + gamma * np.einsum("zaw,w->za", ais.p_ais, q.max(axis=1))
    return float(np.max(np.abs(t - q)))


def asql_policy(q: np.ndarray) -> DecisionRule:
    """Greedy rule; ties resolve to the lowest action index."""
    q = np.asarray(q)
    return DecisionRule.deterministic(np.argmax(q, axis=1), q.shape[1])


def asac_fixed_point(
    model: PomdpModel, m: AgentStateMachine, pi: DecisionRule, tol: float = 1e-12
) -> FixedPointResult:
    """Limit of the TD iterates: the on-policy linear fixed point
    q = r + gamma P Pi q built from pi's stationary distribution."""
    sd, ais = _fitted_or_raise(model, m, pi)
    Z, A = ais.r_ais.shape
    n = Z * A
    gamma = model.gamma
    # M[(z,a),(z2,a2)] = P(z2 | z, a) pi(a2 | z2)
    M = (ais.p_ais[:, :, :, None] * pi.probs[None, None, :, :]).reshape(n, n)
    q = np.linalg.solve(np.eye(n) - gamma * M, ais.r_ais.reshape(n)).reshape(Z, A)
    expect_next = np.einsum("zaw,wb,wb->za", ais.p_ais, pi.probs, q)
    residual = float(np.max(np.abs(ais.r_ais + gamma * expect_next - q)))
    return FixedPointResult(q, sd.a1_ok, sd.aperiodic, residual)


def asac_performance(xi1_za: np.ndarray, q: np.ndarray) -> float:
    """Initial-distribution-weighted value sum_{z,a} xi1(z, a) q(z, a)."""
    return float(np.sum(xi1_za * q))
