import numpy as np
import pytest

from agentpomdp import (
    DecisionRule,
    ModelDocument,
    ParseError,
    Policy,
    UnsupportedFeatureError,
    parse_cassandra,
    parse_native,
    parse_policy,
    serialize_native,
    serialize_policy,
    worlds,
)
from agentpomdp.cli import data_path

MINIMAL = """
[model]
states 1
actions 1
obs 1
gamma 0.9
[kernel]
0 0 -> 0 0 1.0
[reward]
0 0 1.0
[init]
state 0 1.0
obs 0 0 1.0
"""


def random_document(rng, with_machines=True):
    dims = rng.integers(1, 4, size=3)
    model = worlds.random_model(rng, int(dims[0]), int(dims[1]), int(dims[2]),
                                gamma=float(rng.uniform(0.2, 0.95)))
    machines = {}
    if with_machines:
        machines["m0"] = worlds.random_machine(
            rng, int(rng.integers(1, 4)), model.n_obs, model.n_actions
        )
        machines["win"] = worlds.window_machine(1, model.n_obs, model.n_actions)
    meta = {"seed": str(rng.integers(0, 999))}
    return ModelDocument(model, machines, meta)


class TestNativeFormat:
    def test_minimal_document(self):
        doc = parse_native(MINIMAL)
        assert doc.model.n_states == 1
        assert doc.model.reward[0, 0] == 1.0

    def test_fig2_fixture(self):
        with open(data_path("fig2.pomdpz")) as fh:
            doc = parse_native(fh.read())
        assert np.allclose(doc.model.reward[:, 0], [-1.0, 0.0, 2.0])
        assert np.allclose(doc.model.reward[:, 1], -0.5)
        assert doc.model.gamma == 0.9
        assert "z1" in doc.machines
        assert doc.machines["z1"].n_agent_states == 1

    def test_kernel_row_sum_error_carries_line(self):
        bad = MINIMAL.replace("0 0 -> 0 0 1.0", "0 0 -> 0 0 0.98")
        with pytest.raises(ParseError) as exc:
            parse_native(bad)
        assert "0.98" in str(exc.value)
        assert exc.value.line is not None

    def test_syntax_error_line(self):
        with pytest.raises(ParseError) as exc:
            parse_native("[model]\nstates 1\nactions 1\nobs 1\ngamma x\n")
        assert exc.value.line == 5

    def test_unknown_machine_kind(self):
        bad = MINIMAL + "[machine bad]\nkind fancy\n"
        with pytest.raises(ParseError, match="fancy"):
            parse_native(bad)

    def test_roundtrip_random_documents(self, rng):
        for _ in range(30):
            doc = random_document(rng)
            text = serialize_native(doc)
            doc2 = parse_native(text)
            assert serialize_native(doc2) == text
            assert np.array_equal(doc2.model.kernel, doc.model.kernel)
            assert np.array_equal(doc2.model.reward, doc.model.reward)
            assert np.array_equal(doc2.model.init_state, doc.model.init_state)
            assert np.array_equal(doc2.model.init_obs, doc.model.init_obs)
            assert doc2.model.gamma == doc.model.gamma
            for name, m in doc.machines.items():
                m2 = doc2.machines[name]
                assert np.array_equal(m.init_fn, m2.init_fn)
                assert np.array_equal(m.update_fn, m2.update_fn)
            assert doc2.metadata == doc.metadata

    def test_builtin_machines_roundtrip_compactly(self, fig2):
        doc = ModelDocument(
            fig2,
            {
                "id": worlds.identity_machine(1, 2),
                "w1": worlds.window_machine(1, 1, 2),
                "b2": worlds.belief_machine(fig2, 2),
            },
        )
        text = serialize_native(doc)
        assert "kind identity" in text
        assert "kind window 1" in text
        assert "kind belief 2" in text
        doc2 = parse_native(text)
        assert serialize_native(doc2) == text


class TestPolicyFormat:
    def test_deterministic_two_line_table(self):
        p = Policy.stationary(DecisionRule.deterministic([1, 0], 2))
        m = worlds.window_machine(0, 2, 2)
        text = serialize_policy(p, m)
        body = [l for l in text.splitlines() if l and not l.startswith("[")]
        assert body[-2:] == ["0 1", "1 0"]
        p2 = parse_policy(text)
        assert np.array_equal(p2.tail.actions, [1, 0])

    def test_stochastic_exact_roundtrip(self):
        p = Policy.stationary(DecisionRule.stochastic([[0.39, 0.61]]))
        m = worlds.fig2_machine()
        p2 = parse_policy(serialize_policy(p, m))
        assert np.array_equal(p2.tail.probs, p.tail.probs)

    def test_nonstationary_header_and_tail(self, rng):
        rules = [worlds.random_rule(rng, 2, 2) for _ in range(3)]
        tail = worlds.random_rule(rng, 2, 2, deterministic=True)
        p = Policy.non_stationary(rules, tail)
        m = worlds.window_machine(0, 2, 2)
        text = serialize_policy(p, m)
        assert "kind nonstationary" in text
        assert "horizon 3" in text
        assert "[tail]" in text
        p2 = parse_policy(text)
        assert len(p2.rules) == 3
        for r1, r2 in zip(p.rules, p2.rules):
            assert np.array_equal(r1.probs, r2.probs)
        assert np.array_equal(p2.tail.probs, tail.probs)

    def test_policy_roundtrip_property(self, rng):
        m = worlds.window_machine(0, 3, 3)
        for _ in range(25):
            if rng.uniform() < 0.5:
                p = Policy.stationary(worlds.random_rule(rng, 3, 3, rng.uniform() < 0.5))
            else:
                n = int(rng.integers(1, 4))
                p = Policy.non_stationary(
                    [worlds.random_rule(rng, 3, 3, rng.uniform() < 0.5) for _ in range(n)],
                    worlds.random_rule(rng, 3, 3),
                )
            text = serialize_policy(p, m)
            assert serialize_policy(parse_policy(text), m) == text


TIGER_STYLE = """
# two-state guessing problem, identity observations
discount: 0.8
values: reward
states: left right
actions: listen open
observations: obs-left obs-right

start: uniform

T: listen identity
T: open uniform

O: * identity

R: listen : * : * : * -1.0
R: open : left : * : * 5.0
R: open : right : * : * -10.0
"""


class TestCassandra:
    def test_tiger_style_file(self):
        model = parse_cassandra(TIGER_STYLE)
        assert model.n_states == model.n_obs == 2
        assert model.gamma == 0.8
        # joint kernel = T * O with O identity: P(s2, y2=s2 | s, a)
        assert model.kernel[0, 0, 0, 0] == pytest.approx(1.0)
        assert model.kernel[0, 1, 1, 1] == pytest.approx(0.5)
        assert model.kernel[0, 1, 1, 0] == 0.0
        assert model.reward[0, 1] == 5.0
        assert model.reward[1, 0] == -1.0

    def test_wildcard_uniform(self):
        text = TIGER_STYLE.replace("T: listen identity", "T: * uniform")
        text = text.replace("T: open uniform\n", "")
        model = parse_cassandra(text)
        assert np.allclose(model.state_kernel(), 0.5)

    def test_missing_discount(self):
        text = TIGER_STYLE.replace("discount: 0.8", "")
        with pytest.raises(ParseError, match="discount"):
            parse_cassandra(text)

    def test_cost_values_unsupported(self):
        text = TIGER_STYLE.replace("values: reward", "values: cost")
        with pytest.raises(UnsupportedFeatureError, match="cost"):
            parse_cassandra(text)

    def test_state_dependent_next_reward_unsupported(self):
        text = TIGER_STYLE.replace(
            "R: open : left : * : * 5.0", "R: open : left : right : * 5.0"
        )
        with pytest.raises(UnsupportedFeatureError):
            parse_cassandra(text)

    def test_start_include_unsupported(self):
        text = TIGER_STYLE.replace("start: uniform", "start include: left")
        with pytest.raises(UnsupportedFeatureError):
            parse_cassandra(text)

    def test_factored_recovery(self, rng):
        # write a random factored model, parse, and recover T and O exactly
        for _ in range(5):
            S, A, Y = 2, 2, 2
            T = rng.dirichlet(np.ones(S), size=(A, S))
            O = rng.dirichlet(np.ones(Y), size=(A, S))
            lines = ["discount: 0.9", "values: reward", f"states: {S}",
                     f"actions: {A}", f"observations: {Y}", "start: uniform"]
            for a in range(A):
                for s in range(S):
                    for s2 in range(S):
                        lines.append(f"T: {a} : {s} : {s2} {T[a, s, s2]!r}")
            for a in range(A):
                for s2 in range(S):
                    for y in range(Y):
                        lines.append(f"O: {a} : {s2} : {y} {O[a, s2, y]!r}")
            lines.append("R: * : * : * : * 0.0")
            model = parse_cassandra("\n".join(lines))
            T_rec = model.state_kernel().transpose(1, 0, 2)
            assert np.max(np.abs(T_rec - T)) < 1e-12
            for a in range(A):
                for s in range(S):
                    for s2 in range(S):
                        if T[a, s, s2] > 1e-9:
                            o_rec = model.kernel[s, a, s2, :] / T[a, s, s2]
                            assert np.max(np.abs(o_rec - O[a, s2])) < 1e-9

    def test_matrix_form(self):
        text = """
discount: 0.9
values: reward
states: 2
actions: 1
observations: 2
T: 0
0.25 0.75
0.5 0.5
O: 0 uniform
R: 0 : * : * : * 1.0
"""
        model = parse_cassandra(text)
        assert model.state_kernel()[0, 0, 1] == pytest.approx(0.75)
        assert model.kernel[0, 0, 1, 0] == pytest.approx(0.75 * 0.5)
