import numpy as np
import pytest

from agentpomdp import (
    DecisionRule,
    Policy,
    SoftmaxPolicyParams,
    ValidationError,
    build_product_chain,
    compare_gradients,
    exact_policy_gradient,
    finite_diff_gradient,
    gradient_ascent,
    identity_machine,
    performance,
    policy_evaluate,
    sweep_1param,
    xi_init,
)
from agentpomdp import worlds
from conftest import single_state_model, value_iteration_q


def logit_params(p):
    """Two-action single-state softmax hitting action-1 probability p."""
    return SoftmaxPolicyParams(np.array([[0.0, np.log(p / (1 - p))]]))


class TestExactGradient:
    def test_single_action_zero(self, rng):
        model = worlds.random_model(rng, 3, 1, 2, gamma=0.8)
        m = worlds.random_machine(rng, 2, 2, 1)
        g = exact_policy_gradient(model, m, SoftmaxPolicyParams(np.zeros((2, 1))))
        assert np.allclose(g, 0.0, atol=1e-12)

    def test_near_stationarity_at_sweep_optimum(self, fig2, fig2_machine):
        grid = np.linspace(0.3, 0.5, 20001)
        curve = sweep_1param(fig2, grid)
        p_star = float(curve[np.argmax(curve[:, 1]), 0])
        g = exact_policy_gradient(fig2, fig2_machine, logit_params(p_star))
        assert np.max(np.abs(g)) < 1e-3

    def test_matches_finite_differences(self, rng):
        worst = 0.0
        for _ in range(50):
            model = worlds.random_model(rng, 3, 2, 2, gamma=0.8)
            m = worlds.random_machine(rng, 2, 2, 2)
            params = SoftmaxPolicyParams(rng.normal(scale=0.7, size=(2, 2)))
            rep = compare_gradients(model, m, params, h=1e-5)
            worst = max(worst, rep.max_rel_err)
        assert worst < 1e-5

    def test_rows_sum_to_zero(self, fig2, fig2_machine):
        g = exact_policy_gradient(fig2, fig2_machine, logit_params(0.3))
        assert np.allclose(g.sum(axis=1), 0.0, atol=1e-10)


class TestFiniteDifferences:
    def test_constant_reward_zero(self, rng):
        kernel = rng.dirichlet(np.ones(4), size=(2, 2)).reshape(2, 2, 2, 2)
        model = worlds.random_model(rng, 2, 2, 2, gamma=0.8)
        flat = np.full((2, 2), 0.7)
        model = type(model)(2, 2, 2, model.kernel, flat, model.init_state,
                            model.init_obs, 0.8)
        m = worlds.random_machine(rng, 2, 2, 2)
        g = finite_diff_gradient(model, m, SoftmaxPolicyParams(rng.normal(size=(2, 2))))
        assert np.max(np.abs(g)) < 1e-6

    def test_linearity_in_reward_scale(self, rng):
        model = worlds.random_model(rng, 2, 2, 2, gamma=0.8)
        doubled = type(model)(2, 2, 2, model.kernel, 2.0 * model.reward,
                              model.init_state, model.init_obs, 0.8)
        m = worlds.random_machine(rng, 2, 2, 2)
        params = SoftmaxPolicyParams(rng.normal(size=(2, 2)))
        g1 = exact_policy_gradient(model, m, params)
        g2 = exact_policy_gradient(doubled, m, params)
        assert np.allclose(g2, 2.0 * g1, atol=1e-9)


class TestSoftmaxInvariance:
    def test_shift_leaves_rule_value_gradient(self, fig2, fig2_machine, rng):
        theta = rng.normal(size=(1, 2))
        shifted = theta + 3.7
        p1, p2 = SoftmaxPolicyParams(theta), SoftmaxPolicyParams(shifted)
        assert np.allclose(p1.rule().probs, p2.rule().probs, atol=1e-12)
        j1 = performance(fig2, fig2_machine, Policy.stationary(p1.rule())).value
        j2 = performance(fig2, fig2_machine, Policy.stationary(p2.rule())).value
        assert abs(j1 - j2) < 1e-12
        g1 = exact_policy_gradient(fig2, fig2_machine, p1)
        g2 = exact_policy_gradient(fig2, fig2_machine, p2)
        assert np.max(np.abs(g1 - g2)) < 1e-12


class TestGradientAscent:
    def test_fig2_converges_to_stochastic_optimum(self, fig2, fig2_machine):
        res = gradient_ascent(fig2, fig2_machine, SoftmaxPolicyParams(np.zeros((1, 2))),
                              step=0.05, iters=3000, grad_tol=1e-6)
        p = res.params.rule().probs[0, 1]
        assert res.converged
        assert 0.35 <= p <= 0.43
        assert res.j > -5.0

    def test_monotone_trace(self, fig2, fig2_machine):
        res = gradient_ascent(fig2, fig2_machine, SoftmaxPolicyParams(np.zeros((1, 2))),
                              step=0.5, iters=200, grad_tol=1e-8)
        trace = np.array(res.j_trace)
        assert np.all(np.diff(trace) >= -1e-12)

    def test_single_action_immediate(self, rng):
        model = worlds.random_model(rng, 2, 1, 2, gamma=0.8)
        m = worlds.random_machine(rng, 2, 2, 1)
        res = gradient_ascent(model, m, SoftmaxPolicyParams(np.zeros((2, 1))))
        assert res.converged and res.iterations == 0

    def test_mdp_reaches_value_iteration_optimum(self, rng):
        model = worlds.random_mdp(rng, 3, 2, gamma=0.8)
        m = worlds.mdp_machine(model)
        q_star = value_iteration_q(model)
        j_star = float(model.init_state @ q_star.max(axis=1))
        # deterministic optimum: softmax saturation needs a large base step
        res = gradient_ascent(model, m, SoftmaxPolicyParams(np.zeros((3, 2))),
                              step=200.0, iters=6000, grad_tol=1e-12)
        assert abs(res.j - j_star) < 1e-6


class TestSweep:
    def test_fig2_endpoints(self, fig2):
        curve = sweep_1param(fig2, [0.0, 1.0])
        assert curve[0, 1] == pytest.approx(-10.0, abs=1e-9)
        assert curve[1, 1] == pytest.approx(-5.0, abs=1e-9)

    def test_fig2_argmax_location(self, fig2):
        grid = np.linspace(0.0, 1.0, 201)
        curve = sweep_1param(fig2, grid)
        p_hat = float(curve[np.argmax(curve[:, 1]), 0])
        assert 0.385 - 1e-12 <= p_hat <= 0.395 + 1e-12
        assert curve[:, 1].max() > -5.0

    def test_matches_product_chain_evaluation(self, fig2, fig2_machine):
        chain = build_product_chain(fig2, fig2_machine)
        xi = xi_init(fig2, fig2_machine).dist
        for p in np.linspace(0, 1, 21):
            j_sweep = sweep_1param(fig2, [p])[0, 1]
            rule = DecisionRule.stochastic([[1 - p, p]])
            j_chain = policy_evaluate(chain, rule, xi, fig2.gamma).j
            assert abs(j_sweep - j_chain) < 1e-10

    def test_needs_two_actions(self, rng):
        model = worlds.random_model(rng, 2, 1, 2)
        with pytest.raises(ValidationError):
            sweep_1param(model, [0.5])
