"""Planning and learning with agent-state based policies in finite POMDPs."""

from ._kernels import NUMBA_ENABLED, backend_name
from .ais import (
    AISLossReport,
    AISModel,
    AISSolution,
    InfoStateReport,
    IPMSpec,
    check_information_state,
    compute_ais_losses,
    fit_ais,
    ipm_distance,
    minkowski_norm,
    solve_ais_dp,
    suboptimality_bound,
)
from .bruteforce import (
    ClassReport,
    GridSearchResult,
    HistoryDpResult,
    OrderingBudgets,
    OrderingCheck,
    enumerate_stationary_det,
    grid_search_stationary_stoch,
    history_dp,
    search_nonstationary_det,
    verify_ordering,
)
from .core import (
    AgentStateMachine,
    DecisionRule,
    History,
    PomdpModel,
    Policy,
    agent_state_init,
    agent_state_update,
    belief_lattice,
    belief_machine,
    belief_update,
    compress_history,
    decode_window,
    encode_window,
    enumerate_deterministic_rules,
    identity_machine,
    project_to_lattice,
    sample_step,
    window_machine,
    window_size,
)
from .designer import (
    JointXi,
    MetaPlan,
    NonstationaryClassReport,
    compare_nonstationary_classes,
    plan_designer,
    sample_stochastic_sequences,
    xi_init,
    xi_reward,
    xi_update,
)
from .errors import (
    AgentPomdpError,
    AmbiguousChainError,
    CapacityError,
    ImpossibleObservationError,
    ParseError,
    UnsupportedFeatureError,
    ValidationError,
)
from .evaluate import (
    EvalBundle,
    PerformanceResult,
    ProductChain,
    StationaryDist,
    build_product_chain,
    monte_carlo_J,
    performance,
    policy_evaluate,
    stationary_dist,
)
from .gradients import (
    AscentResult,
    GradientReport,
    SoftmaxPolicyParams,
    compare_gradients,
    exact_policy_gradient,
    finite_diff_gradient,
    gradient_ascent,
    sweep_1param,
)
from .learning import (
    FixedPointResult,
    LearningConfig,
    LearningRun,
    asac_fixed_point,
    asac_td_run,
    asql_fixed_point,
    asql_policy,
    asql_run,
)
from .model_io import (
    ModelDocument,
    parse_cassandra,
    parse_native,
    parse_policy,
    serialize_native,
    serialize_policy,
)

__version__ = "0.1.0"
