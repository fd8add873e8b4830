import numpy as np
import pytest

from agentpomdp import worlds


@pytest.fixture(scope="session")
def fig2():
    return worlds.fig2_model()


@pytest.fixture(scope="session")
def fig2_machine():
    return worlds.fig2_machine()


@pytest.fixture(scope="session")
def fig1():
    return worlds.fig1_model()


@pytest.fixture(scope="session")
def fig1_machine():
    return worlds.fig1_machine()


@pytest.fixture(scope="session")
def mdp():
    return worlds.mdp_fixture()


@pytest.fixture(scope="session")
def mdp_machine(mdp):
    return worlds.mdp_machine(mdp)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def value_iteration_q(model, tol=1e-12):
    """Independent optimal-Q oracle on the underlying MDP (state marginal)."""
    P = model.state_kernel()
    V = np.zeros(model.n_states)
    while True:
        Q = model.reward + model.gamma * np.einsum("sap,p->sa", P, V)
        V2 = Q.max(axis=1)
        if np.max(np.abs(V2 - V)) * model.gamma / (1 - model.gamma) <= tol:
            return model.reward + model.gamma * np.einsum("sap,p->sa", P, V2)
        V = V2


def single_state_model(r=1.0, gamma=0.9):
    """Smallest possible model: one state, action, and observation."""
    from agentpomdp import PomdpModel

    return PomdpModel(
        1, 1, 1,
        kernel=np.ones((1, 1, 1, 1)),
        reward=np.full((1, 1), r),
        init_state=np.ones(1),
        init_obs=np.ones((1, 1)),
        gamma=gamma,
    )
