import numpy as np
import pytest

from agentpomdp import (
    DecisionRule,
    IPMSpec,
    LearningConfig,
    Policy,
    ValidationError,
    asac_fixed_point,
    asac_td_run,
    asql_fixed_point,
    asql_policy,
    asql_run,
    build_product_chain,
    compute_ais_losses,
    fit_ais,
    history_dp,
    identity_machine,
    minkowski_norm,
    performance,
    policy_evaluate,
    xi_init,
)
from agentpomdp import worlds
from agentpomdp._kernels import NUMBA_ENABLED
from conftest import single_state_model, value_iteration_q

LONG_STEPS = 10**6 if NUMBA_ENABLED else 3 * 10**5


class TestLearningConfig:
    def test_exponent_range(self):
        with pytest.raises(ValidationError):
            LearningConfig(steps=10, lr_exponent=0.5)
        with pytest.raises(ValidationError):
            LearningConfig(steps=10, lr_exponent=1.2)

    def test_deterministic_given_seed(self, fig2, fig2_machine):
        mu = worlds.uniform_rule(1, 2)
        cfg = LearningConfig(steps=5000, seed=11, eval_stride=1000)
        a = asql_run(fig2, fig2_machine, mu, cfg)
        b = asql_run(fig2, fig2_machine, mu, cfg)
        assert np.array_equal(a.q, b.q)
        assert np.array_equal(a.snapshots, b.snapshots)


class TestAsqlRun:
    def test_single_cell_geometric(self):
        model = single_state_model(r=1.0, gamma=0.9)
        m = identity_machine(1)
        # lr_exponent 0.6 burns off the zero-initialization bias quickly
        run = asql_run(model, m, DecisionRule.stochastic([[1.0]]),
                       LearningConfig(steps=200_000, seed=0, eval_stride=200_000,
                                      lr_exponent=0.6))
        assert abs(run.q[0, 0] - 10.0) < 0.05

    def test_fig2_approaches_fixed_point(self, fig2, fig2_machine):
        mu = worlds.uniform_rule(1, 2)
        fp = asql_fixed_point(fig2, fig2_machine, mu)
        run = asql_run(fig2, fig2_machine, mu,
                       LearningConfig(steps=LONG_STEPS, seed=1, eval_stride=LONG_STEPS))
        assert np.max(np.abs(run.q - fp.q)) < 0.05

    def test_mdp_reaches_optimal_q(self, mdp, mdp_machine):
        mu = worlds.uniform_rule(3, 2)
        run = asql_run(mdp, mdp_machine, mu,
                       LearningConfig(steps=LONG_STEPS, seed=2, eval_stride=LONG_STEPS,
                                      lr_exponent=0.6))
        q_star = value_iteration_q(mdp)
        assert np.max(np.abs(run.q - q_star)) < 0.05

    def test_requires_exploring_behavior(self, fig2, fig2_machine):
        with pytest.raises(ValidationError):
            asql_run(fig2, fig2_machine, DecisionRule.deterministic([1], 2),
                     LearningConfig(steps=100))

    def test_convergence_trend(self, fig2, fig2_machine, rng):
        # distance to the fixed point shrinks from 1e4 to 1e6 steps for most seeds
        instances = [(fig2, fig2_machine)]
        n_rand = 4 if NUMBA_ENABLED else 1
        for _ in range(n_rand):
            model = worlds.random_model(rng, 3, 2, 2, gamma=0.8)
            m = worlds.random_machine(rng, 2, 2, 2)
            instances.append((model, m))
        steps = LONG_STEPS
        early = max(1, steps // 100)
        for model, m in instances:
            mu = worlds.uniform_rule(m.n_agent_states, model.n_actions)
            fp = asql_fixed_point(model, m, mu)
            wins = 0
            seeds = (0, 1, 2, 3, 4)
            for seed in seeds:
                run = asql_run(model, m, mu,
                               LearningConfig(steps=steps, seed=seed, eval_stride=early))
                d = run.distances_to(fp.q)
                if d[-1] < d[0]:
                    wins += 1
            assert wins >= 3, f"trend failed on {wins}/5 seeds"


class TestAsqlFixedPoint:
    def test_mdp_behavior_independent(self, mdp, mdp_machine):
        mu1 = worlds.uniform_rule(3, 2)
        mu2 = DecisionRule.stochastic([[0.7, 0.3], [0.2, 0.8], [0.4, 0.6]])
        q1 = asql_fixed_point(mdp, mdp_machine, mu1).q
        q2 = asql_fixed_point(mdp, mdp_machine, mu2).q
        assert np.max(np.abs(q1 - q2)) < 1e-8
        assert np.max(np.abs(q1 - value_iteration_q(mdp))) < 1e-9

    def test_fig2_behavior_dependent(self, fig2, fig2_machine):
        q1 = asql_fixed_point(fig2, fig2_machine, worlds.uniform_rule(1, 2)).q
        q2 = asql_fixed_point(fig2, fig2_machine,
                              DecisionRule.stochastic([[0.2, 0.8]])).q
        assert np.max(np.abs(q1 - q2)) > 1e-3

    def test_single_action_policy_evaluation(self):
        model = single_state_model(r=1.0, gamma=0.9)
        fp = asql_fixed_point(model, identity_machine(1), DecisionRule.stochastic([[1.0]]))
        assert fp.q[0, 0] == pytest.approx(10.0, abs=1e-10)

    def test_residual(self, fig2, fig2_machine):
        fp = asql_fixed_point(fig2, fig2_machine, worlds.uniform_rule(1, 2), tol=1e-12)
        assert fp.residual < 1e-10
        assert fp.a1_ok

    def test_zero_visit_cell_error(self, fig2, fig2_machine):
        with pytest.raises(ValidationError, match=r"z=0, a=0"):
            asql_fixed_point(fig2, fig2_machine, DecisionRule.deterministic([1], 2))


class TestAsqlPolicy:
    def test_greedy(self):
        assert asql_policy(np.array([[0.0, 1.0]])).actions[0] == 1

    def test_tie_low_index(self):
        assert asql_policy(np.array([[0.7, 0.7]])).actions[0] == 0

    def test_fig2_corollary_bound(self, fig2, fig2_machine):
        mu = worlds.uniform_rule(1, 2)
        fp = asql_fixed_point(fig2, fig2_machine, mu)
        greedy = asql_policy(fp.q)
        j_greedy = performance(fig2, fig2_machine, Policy.stationary(greedy)).value
        spec = IPMSpec.total_variation()
        rep = compute_ais_losses(fig2, fig2_machine, fit_ais(fig2, fig2_machine, mu),
                                 spec, horizon=8)
        v = fp.q.max(axis=1)
        bound = (2 / (1 - fig2.gamma)) * (
            rep.eps + fig2.gamma * rep.delta * minkowski_norm(spec, v)
        )
        hnd = history_dp(fig2, horizon=30, tol=1e-3)
        assert hnd.hi - j_greedy <= bound + 1e-9


class TestAsacRun:
    def test_single_cell(self):
        model = single_state_model(r=1.0, gamma=0.9)
        run = asac_td_run(model, identity_machine(1), DecisionRule.stochastic([[1.0]]),
                          LearningConfig(steps=200_000, seed=0, eval_stride=200_000,
                                         lr_exponent=0.6))
        assert abs(run.q[0, 0] - 10.0) < 0.05

    def test_fig2_approaches_fixed_point(self, fig2, fig2_machine):
        pi = DecisionRule.stochastic([[0.61, 0.39]])
        fp = asac_fixed_point(fig2, fig2_machine, pi)
        run = asac_td_run(fig2, fig2_machine, pi,
                          LearningConfig(steps=LONG_STEPS, seed=2, eval_stride=LONG_STEPS))
        assert np.max(np.abs(run.q - fp.q)) < 0.05

    def test_mdp_matches_exact_evaluation(self, mdp, mdp_machine):
        pi = DecisionRule.stochastic([[0.8, 0.2], [0.2, 0.8], [0.5, 0.5]])
        fp = asac_fixed_point(mdp, mdp_machine, pi)
        run = asac_td_run(mdp, mdp_machine, pi,
                          LearningConfig(steps=2 * LONG_STEPS, seed=4,
                                         eval_stride=2 * LONG_STEPS, lr_exponent=0.6))
        assert np.max(np.abs(run.q - fp.q)) < 0.05


class TestAsacFixedPoint:
    def test_mdp_equals_exact_on_policy_q(self, mdp, mdp_machine):
        pi = DecisionRule.stochastic([[0.8, 0.2], [0.2, 0.8], [0.5, 0.5]])
        fp = asac_fixed_point(mdp, mdp_machine, pi)
        chain = build_product_chain(mdp, mdp_machine)
        b = policy_evaluate(chain, pi, xi_init(mdp, mdp_machine).dist, mdp.gamma)
        q_diag = np.array([[b.q[z, z, a] for a in range(2)] for z in range(3)])
        assert np.max(np.abs(fp.q - q_diag)) < 1e-10
        assert fp.residual < 1e-10

    def test_fig2_value_within_ais_style_bound(self, fig2, fig2_machine):
        pi = DecisionRule.stochastic([[0.5, 0.5]])
        fp = asac_fixed_point(fig2, fig2_machine, pi)
        xi_za = xi_init(fig2, fig2_machine).dist.sum(axis=0)[:, None] * pi.probs
        j_asac = float((xi_za * fp.q).sum())
        j_exact = performance(fig2, fig2_machine, Policy.stationary(pi)).value
        spec = IPMSpec.total_variation()
        rep = compute_ais_losses(fig2, fig2_machine, fit_ais(fig2, fig2_machine, pi),
                                 spec, horizon=8)
        bound = (1 / (1 - fig2.gamma)) * (
            rep.eps + fig2.gamma * rep.delta * minkowski_norm(spec, fp.q.max(axis=1))
        )
        assert abs(j_asac - j_exact) <= bound + 1e-9

    def test_zero_visit_cell_error(self, fig2, fig2_machine):
        with pytest.raises(ValidationError, match="zero visitation"):
            asac_fixed_point(fig2, fig2_machine, DecisionRule.deterministic([0], 2))


def test_snapshot_csv(fig2, fig2_machine):
    run = asql_run(fig2, fig2_machine, worlds.uniform_rule(1, 2),
                   LearningConfig(steps=3000, seed=0, eval_stride=1000))
    lines = run.to_csv().splitlines()
    assert lines[0] == "step,z,a,q"
    assert len(lines) == 1 + 3 * 1 * 2
    assert lines[1].startswith("1000,0,0,")
