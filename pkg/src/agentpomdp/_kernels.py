"""Hot simulation loops: single-trajectory Q-learning / SARSA updates,
Monte-Carlo returns, and visit counting.

Kernels are compiled with numba's @njit by default.  Setting the
environment variable AGENTPOMDP_NO_NUMBA=1 (or any value other than "0")
before import selects the pure-Python/numpy fallback path, which runs the
identical source.  Both paths draw from the same MT19937 stream, so results
are bit-identical across backends for a given seed.
"""

import os

import numpy as np

_flag = os.environ.get("AGENTPOMDP_NO_NUMBA", "")
NUMBA_ENABLED = False

if _flag in ("", "0"):
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        pass

if not NUMBA_ENABLED:

    def njit(*args, **kwargs):
        """No-op decorator: run kernels as plain Python."""
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "python"


def python_version(kernel):
    """The uncompiled version of a kernel (same function when numba is off)."""
    return getattr(kernel, "py_func", kernel)


@njit(cache=True)
def _draw(cdf):
    u = np.random.random()
    j = 0
    last = cdf.shape[0] - 1
    while j < last and cdf[j] < u:
        j += 1
    return j


@njit(cache=True)
def mc_returns(
    seed,
    episodes,
    horizon,
    gamma,
    init_cdf,
    init_obs_cdf,
    joint_cdf,
    n_obs,
    reward,
    phi0,
    phi,
    rule_probs_cdf,
    n_prefix,
):
    """Discounted truncated returns of `episodes` independent rollouts.

    rule_probs_cdf has shape (n_prefix + 1, Z, A); row t applies at step t
    for t < n_prefix and the last row is the stationary tail.
    """
    np.random.seed(seed)
    out = np.empty(episodes)
    for ep in range(episodes):
        s = _draw(init_cdf)
        y = _draw(init_obs_cdf[s])
        z = phi0[y]
        acc = 0.0
        disc = 1.0
        for t in range(horizon):
            r_idx = t if t < n_prefix else n_prefix
            a = _draw(rule_probs_cdf[r_idx, z])
            acc += disc * reward[s, a]
            disc *= gamma
            sy = _draw(joint_cdf[s, a])
            s = sy // n_obs
            y = sy % n_obs
            z = phi[z, y, a]
        out[ep] = acc
    return out


@njit(cache=True)
def asql_trajectory(
    seed,
    steps,
    gamma,
    omega,
    init_cdf,
    init_obs_cdf,
    joint_cdf,
    n_obs,
    reward,
    phi0,
    phi,
    mu_cdf,
    q0,
    stride,
):
    """Q-learning along one continuing trajectory under behavior rule mu.

    Per-cell learning rate 1 / (1 + visits)^omega; only the visited cell is
    updated each step.  Snapshots of Q are stored every `stride` steps.
    """
    np.random.seed(seed)
    n_z, n_a = q0.shape
    q = q0.copy()
    visits = np.zeros((n_z, n_a), dtype=np.int64)
    n_snap = steps // stride
    snaps = np.empty((n_snap, n_z, n_a))
    snap_steps = np.empty(n_snap, dtype=np.int64)
    s = _draw(init_cdf)
    y = _draw(init_obs_cdf[s])
    z = phi0[y]
    k = 0
    for t in range(steps):
        a = _draw(mu_cdf[z])
        r = reward[s, a]
        sy = _draw(joint_cdf[s, a])
        s2 = sy // n_obs
        y2 = sy % n_obs
        z2 = phi[z, y2, a]
        best = q[z2, 0]
        for b in range(1, n_a):
            if q[z2, b] > best:
                best = q[z2, b]
        alpha = 1.0 / (1.0 + visits[z, a]) ** omega
        q[z, a] += alpha * (r + gamma * best - q[z, a])
        visits[z, a] += 1
        s = s2
        y = y2
        z = z2
        if (t + 1) % stride == 0:
            snaps[k] = q
            snap_steps[k] = t + 1
            k += 1
    return snap_steps, snaps, q, visits


@njit(cache=True)
def sarsa_trajectory(
    seed,
    steps,
    gamma,
    omega,
    init_cdf,
    init_obs_cdf,
    joint_cdf,
    n_obs,
    reward,
    phi0,
    phi,
    pi_cdf,
    q0,
    stride,
):
    """On-policy TD evaluation of rule pi along one continuing trajectory."""
    np.random.seed(seed)
    n_z, n_a = q0.shape
    q = q0.copy()
    visits = np.zeros((n_z, n_a), dtype=np.int64)
    n_snap = steps // stride
    snaps = np.empty((n_snap, n_z, n_a))
    snap_steps = np.empty(n_snap, dtype=np.int64)
    s = _draw(init_cdf)
    y = _draw(init_obs_cdf[s])
    z = phi0[y]
    a = _draw(pi_cdf[z])
    k = 0
    for t in range(steps):
        r = reward[s, a]
        sy = _draw(joint_cdf[s, a])
        s2 = sy // n_obs
        y2 = sy % n_obs
        z2 = phi[z, y2, a]
        a2 = _draw(pi_cdf[z2])
        alpha = 1.0 / (1.0 + visits[z, a]) ** omega
        q[z, a] += alpha * (r + gamma * q[z2, a2] - q[z, a])
        visits[z, a] += 1
        s = s2
        y = y2
        z = z2
        a = a2
        if (t + 1) % stride == 0:
            snaps[k] = q
            snap_steps[k] = t + 1
            k += 1
    return snap_steps, snaps, q, visits


@njit(cache=True)
def visit_counts(
    seed,
    steps,
    init_cdf,
    init_obs_cdf,
    joint_cdf,
    n_obs,
    phi0,
    phi,
    mu_cdf,
    n_states,
    n_z,
    n_a,
):
    """Empirical (s, y, z, a) occupation counts along one trajectory."""
    np.random.seed(seed)
    counts = np.zeros((n_states, n_obs, n_z, n_a), dtype=np.int64)
    s = _draw(init_cdf)
    y = _draw(init_obs_cdf[s])
    z = phi0[y]
    for _ in range(steps):
        a = _draw(mu_cdf[z])
        counts[s, y, z, a] += 1
        sy = _draw(joint_cdf[s, a])
        s = sy // n_obs
        y = sy % n_obs
        z = phi[z, y, a]
    return counts


def joint_cdf_table(model) -> np.ndarray:
    """Cumulative rows of P(., . | s, a) over the flattened (s2, y2) axis."""
    S, A = model.n_states, model.n_actions
    flat = model.kernel.reshape(S, A, -1)
    return np.cumsum(flat, axis=2)


def rule_cdf(probs: np.ndarray) -> np.ndarray:
    return np.cumsum(probs, axis=-1)
