"""Exact policy gradients for softmax agent-state policies, a
finite-difference oracle, monotone gradient ascent, and the closed-form
one-parameter performance sweep for two-action blind policies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import AgentStateMachine, DecisionRule, PomdpModel
from .designer import xi_init
from .errors import ValidationError
from .evaluate import build_product_chain, policy_evaluate


@dataclass(frozen=True)
class SoftmaxPolicyParams:
    """Logit table theta[z, a]; the induced rule is row-wise softmax."""

    theta: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.theta, dtype=float)
        object.__setattr__(self, "theta", t)
        if t.ndim != 2 or not np.all(np.isfinite(t)):
            raise ValidationError("theta must be a finite (Z, A) table")

    def rule(self) -> DecisionRule:
        shifted = self.theta - self.theta.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return DecisionRule.stochastic(e / e.sum(axis=1, keepdims=True))


@dataclass(frozen=True)
class GradientReport:
    analytic: np.ndarray
    numeric: np.ndarray
    max_rel_err: float


def _evaluate_params(model, m, params, chain=None):
    chain = build_product_chain(model, m) if chain is None else chain
    xi = xi_init(model, m)
    return policy_evaluate(chain, params.rule(), xi.dist, model.gamma)


def exact_policy_gradient(
    model: PomdpModel, m: AgentStateMachine, params: SoftmaxPolicyParams
) -> np.ndarray:
    """dJ/dtheta = sum_{s,z,a} d(s,z,a) Q(s,z,a) dlog pi(a|z)/dtheta.

    For softmax rows, dlog pi(a|z)/dtheta[z,b] = 1{a=b} - pi(b|z).
    """
    bundle = _evaluate_params(model, m, params)
    pi = params.rule().probs
    G = np.einsum("sza,sza->za", bundle.d, bundle.q)
    return G - pi * G.sum(axis=1, keepdims=True)


def finite_diff_gradient(
    model: PomdpModel, m: AgentStateMachine, params: SoftmaxPolicyParams, h: float = 1e-5
) -> np.ndarray:
    """Central differences of the exact performance; oracle for the analytic
    gradient."""
    chain = build_product_chain(model, m)
    theta = params.theta
    grad = np.zeros_like(theta)
    for z in range(theta.shape[0]):
        for a in range(theta.shape[1]):
            for sign in (+1.0, -1.0):
                bumped = theta.copy()
                bumped[z, a] += sign * h
                j = _evaluate_params(model, m, SoftmaxPolicyParams(bumped), chain).j
                grad[z, a] += sign * j
    return grad / (2.0 * h)


def compare_gradients(
    model: PomdpModel, m: AgentStateMachine, params: SoftmaxPolicyParams, h: float = 1e-5
) -> GradientReport:
    analytic = exact_policy_gradient(model, m, params)
    numeric = finite_diff_gradient(model, m, params, h)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return GradientReport(analytic, numeric, float(np.max(np.abs(analytic - numeric) / denom)))


@dataclass(frozen=True)
class AscentResult:
    params: SoftmaxPolicyParams
    j: float
    converged: bool
    iterations: int
    j_trace: tuple


def gradient_ascent(
    model: PomdpModel,
    m: AgentStateMachine,
    params0: SoftmaxPolicyParams,
    step: float = 0.1,
    iters: int = 500,
    grad_tol: float = 1e-6,
) -> AscentResult:
    """Fixed-step ascent with backtracking halving whenever a step would
    decrease J; accepted steps never decrease J."""
    chain = build_product_chain(model, m)
    params = params0
    j = _evaluate_params(model, m, params, chain).j
    trace = [j]
    for it in range(iters):
        g = exact_policy_gradient(model, m, params)
        if np.max(np.abs(g)) < grad_tol:
            return AscentResult(params, j, True, it, tuple(trace))
        trial = step
        while trial > 1e-14:
            cand = SoftmaxPolicyParams(params.theta + trial * g)
            j_cand = _evaluate_params(model, m, cand, chain).j
            if j_cand >= j:
                params, j = cand, j_cand
                trace.append(j)
                break
            trial /= 2.0
        else:
            return AscentResult(params, j, False, it, tuple(trace))
    g = exact_policy_gradient(model, m, params)
    return AscentResult(params, j, bool(np.max(np.abs(g)) < grad_tol), iters, tuple(trace))


def sweep_1param(model: PomdpModel, grid) -> np.ndarray:
    """Exact J for blind two-action mixtures: J(p) = xi1 (I - g P_p)^-1 r_p
    with (P_p, r_p) = (1-p)(P_0, r_0) + p (P_1, r_1); returns rows (p, J)."""
    if model.n_actions != 2:
        raise ValidationError("one-parameter sweep needs exactly two actions")
    P = model.state_kernel()
    I = np.eye(model.n_states)
    out = np.empty((len(grid), 2))
    for i, p in enumerate(grid):
        Pp = (1.0 - p) * P[:, 0, :] + p * P[:, 1, :]
        rp = (1.0 - p) * model.reward[:, 0] + p * model.reward[:, 1]
        v = np.linalg.solve(I - model.gamma * Pp, rp)
        out[i] = (p, float(model.init_state @ v))
    return out
