"""Text formats: the native `.pomdpz` model documents, a reader for the
classic research `.pomdp` format (strict subset), and policy round-trip.

Native format, line oriented, `#` comments:

    [model]
    states <S>
    actions <A>
    obs <Y>
    gamma <float>
    rmax <float>              # optional, defaults to max |reward|
    [kernel]
    <s> <a> -> <s2> <y2> <p>  # omitted entries are zero
    [reward]
    <s> <a> <r>               # omitted entries are zero
    [init]
    state <s> <p>             # or: state uniform
    obs <s> <y> <p>           # or: obs uniform | obs fixed <y>
    [machine <name>]
    kind identity | window <n> | belief <k> | table <Z>
    init <y> <z>              # table machines only
    step <z> <y> <a> <z2>     # table machines only
    [meta]
    <key> <value...>

Rows whose sums drift from 1 by more than 1e-12 but at most 1e-9 are
renormalized; larger drift is a parse error at the offending row.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .core import (
    AgentStateMachine,
    DecisionRule,
    Policy,
    PomdpModel,
    belief_machine,
    identity_machine,
    window_machine,
)
from .errors import ParseError, UnsupportedFeatureError, ValidationError

_ROW_TOL = 1e-9
_EXACT_TOL = 1e-12


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class ModelDocument:
    model: PomdpModel
    machines: dict = field(default_factory=dict)  # name -> AgentStateMachine
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, m in self.machines.items():
            if m.n_obs != self.model.n_obs or m.n_actions != self.model.n_actions:
                raise ValidationError(
                    f"machine {name!r} alphabets do not match the model dimensions"
                )


def _normalize_rows(arr, what, line_of):
    """Renormalize rows with drift in (1e-12, 1e-9]; error beyond 1e-9."""
    sums = arr.sum(axis=-1)
    flat = sums.reshape(-1)
    for i, s in enumerate(flat):
        if abs(s - 1.0) > _ROW_TOL:
            idx = np.unravel_index(i, sums.shape)
            raise ParseError(
                f"{what} row {idx} sums to {s!r}, expected 1 (tolerance {_ROW_TOL})",
                line=line_of(idx),
            )
    drift = np.abs(sums - 1.0) > _EXACT_TOL
    if drift.any():
        arr = arr / np.where(sums == 0.0, 1.0, sums)[..., None]
    return arr


class _Sections:
    """Split a document into [header]-introduced line groups."""

    def __init__(self, text):
        self.groups = []  # (header tokens, header line, [(lineno, tokens)])
        current = None
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].rstrip()
            if not line.strip():
                continue
            stripped = line.strip()
            if stripped.startswith("["):
                if not stripped.endswith("]"):
                    raise ParseError(
                        "unterminated section header",
                        line=lineno,
                        column=line.index("[") + 1,
                    )
                current = (stripped[1:-1].split(), lineno, [])
                self.groups.append(current)
            else:
                if current is None:
                    raise ParseError(
                        "content before the first section header",
                        line=lineno,
                        column=len(line) - len(line.lstrip()) + 1,
                    )
                current[2].append((lineno, stripped.split()))


def _to_int(tok, lineno, what):
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"expected integer {what}, got {tok!r}", line=lineno) from None


def _to_float(tok, lineno, what):
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"expected number {what}, got {tok!r}", line=lineno) from None


def parse_native(text: str) -> ModelDocument:
    sections = _Sections(text)
    dims = {}
    gamma = None
    rmax = None
    kernel_rows = []  # (lineno, s, a, s2, y2, p)
    reward_rows = []
    init_state_rows = []
    init_obs_rows = []
    machines = []  # (name, header lineno, lines)
    metadata = {}
    model_seen = False
    for header, hline, lines in sections.groups:
        kind = header[0]
        if kind == "model":
            model_seen = True
            for lineno, toks in lines:
                key = toks[0]
                if key in ("states", "actions", "obs"):
                    dims[key] = _to_int(toks[1], lineno, key)
                elif key == "gamma":
                    gamma = _to_float(toks[1], lineno, "gamma")
                elif key == "rmax":
                    rmax = _to_float(toks[1], lineno, "rmax")
                else:
                    raise ParseError(f"unknown model field {key!r}", line=lineno)
        elif kind == "kernel":
            for lineno, toks in lines:
                if len(toks) != 6 or toks[2] != "->":
                    raise ParseError("kernel rows are: s a -> s2 y2 p", line=lineno)
                kernel_rows.append(
                    (lineno, *(_to_int(t, lineno, "index") for t in (toks[0], toks[1], toks[3], toks[4])),
                     _to_float(toks[5], lineno, "probability"))
                )
        elif kind == "reward":
            for lineno, toks in lines:
                if len(toks) != 3:
                    raise ParseError("reward rows are: s a r", line=lineno)
                reward_rows.append(
                    (lineno, _to_int(toks[0], lineno, "s"), _to_int(toks[1], lineno, "a"),
                     _to_float(toks[2], lineno, "reward"))
                )
        elif kind == "init":
            for lineno, toks in lines:
                if toks[0] == "state":
                    init_state_rows.append((lineno, toks[1:]))
                elif toks[0] == "obs":
                    init_obs_rows.append((lineno, toks[1:]))
                else:
                    raise ParseError(f"unknown init entry {toks[0]!r}", line=lineno)
        elif kind == "machine":
            if len(header) != 2:
                raise ParseError("machine sections need a name", line=hline)
            machines.append((header[1], hline, lines))
        elif kind == "meta":
            for lineno, toks in lines:
                metadata[toks[0]] = " ".join(toks[1:])
        else:
            raise ParseError(f"unknown section {kind!r}", line=hline)

    if not model_seen:
        raise ParseError("missing [model] section", line=1)
    for key in ("states", "actions", "obs"):
        if key not in dims:
            raise ParseError(f"[model] is missing {key}", line=1)
    if gamma is None:
        raise ParseError("[model] is missing gamma", line=1)
    S, A, Y = dims["states"], dims["actions"], dims["obs"]

    kernel = np.zeros((S, A, S, Y))
    kernel_line = {}
    for lineno, s, a, s2, y2, p in kernel_rows:
        for v, n in ((s, S), (a, A), (s2, S), (y2, Y)):
            if not (0 <= v < n):
                raise ParseError(f"index {v} out of range [0, {n})", line=lineno)
        kernel[s, a, s2, y2] = p
        kernel_line[(s, a)] = lineno
    kernel = _normalize_rows(
        kernel.reshape(S, A, S * Y), "kernel", lambda idx: kernel_line.get(idx)
    ).reshape(S, A, S, Y)

    reward = np.zeros((S, A))
    for lineno, s, a, r in reward_rows:
        if not (0 <= s < S and 0 <= a < A):
            raise ParseError("reward index out of range", line=lineno)
        reward[s, a] = r

    init_state = np.zeros(S)
    state_line = {}
    if len(init_state_rows) == 1 and init_state_rows[0][1] == ["uniform"]:
        init_state[:] = 1.0 / S
    else:
        for lineno, toks in init_state_rows:
            if len(toks) != 2:
                raise ParseError("init state rows are: state s p", line=lineno)
            s = _to_int(toks[0], lineno, "s")
            init_state[s] = _to_float(toks[1], lineno, "probability")
            state_line[(0,)] = lineno
    init_state = _normalize_rows(
        init_state[None, :], "init state", lambda idx: state_line.get(idx)
    )[0]

    init_obs = np.zeros((S, Y))
    obs_line = {}
    if len(init_obs_rows) == 1 and init_obs_rows[0][1] == ["uniform"]:
        init_obs[:] = 1.0 / Y
    elif len(init_obs_rows) == 1 and init_obs_rows[0][1][0] == "fixed":
        y = _to_int(init_obs_rows[0][1][1], init_obs_rows[0][0], "y")
        init_obs[:, y] = 1.0
    else:
        for lineno, toks in init_obs_rows:
            if len(toks) != 3:
                raise ParseError("init obs rows are: obs s y p", line=lineno)
            s = _to_int(toks[0], lineno, "s")
            y = _to_int(toks[1], lineno, "y")
            init_obs[s, y] = _to_float(toks[2], lineno, "probability")
            obs_line[(s,)] = lineno
    init_obs = _normalize_rows(init_obs, "init obs", lambda idx: obs_line.get(idx))

    try:
        model = PomdpModel(S, A, Y, kernel, reward, init_state, init_obs, gamma, r_max=rmax)
    except ValidationError as exc:
        raise ParseError(str(exc)) from exc

    doc_machines = {}
    for name, hline, lines in machines:
        if name in doc_machines:
            raise ParseError(f"duplicate machine name {name!r}", line=hline)
        doc_machines[name] = _parse_machine(model, name, hline, lines)
    return ModelDocument(model, doc_machines, metadata)


def _parse_machine(model, name, hline, lines):
    if not lines or lines[0][1][0] != "kind":
        raise ParseError(f"machine {name!r} must start with a kind line", line=hline)
    lineno, toks = lines[0]
    kind = toks[1]
    if kind == "identity":
        return identity_machine(model.n_obs, model.n_actions)
    if kind == "window":
        return window_machine(_to_int(toks[2], lineno, "n"), model.n_obs, model.n_actions)
    if kind == "belief":
        return belief_machine(model, _to_int(toks[2], lineno, "k"))
    if kind != "table":
        raise ParseError(f"unknown machine kind {kind!r}", line=lineno)
    n_z = _to_int(toks[2], lineno, "Z")
    label = name
    init = np.full(model.n_obs, -1, dtype=np.int64)
    update = np.full((n_z, model.n_obs, model.n_actions), -1, dtype=np.int64)
    for lineno, toks in lines[1:]:
        if toks[0] == "label":
            label = " ".join(toks[1:])
        elif toks[0] == "init" and len(toks) == 3:
            init[_to_int(toks[1], lineno, "y")] = _to_int(toks[2], lineno, "z")
        elif toks[0] == "step" and len(toks) == 5:
            z, y, a, z2 = (_to_int(t, lineno, "index") for t in toks[1:])
            update[z, y, a] = z2
        else:
            raise ParseError(f"unknown machine entry {toks[0]!r}", line=lineno)
    if (init < 0).any() or (update < 0).any():
        raise ParseError(f"machine {name!r} table is incomplete", line=hline)
    return AgentStateMachine(n_z, init, update, label=label)


_WINDOW_RE = re.compile(r"^window\[(\d+)\]$")
_BELIEF_RE = re.compile(r"^belief\[(\d+)\]$")


def _machine_kind_line(model, m):
    """Compact kind line when the machine matches one of the built-in
    constructors, else None (serialize as a table)."""
    if m.label == "identity":
        ref = identity_machine(model.n_obs, model.n_actions)
    elif _WINDOW_RE.match(m.label):
        n = int(_WINDOW_RE.match(m.label).group(1))
        ref = window_machine(n, model.n_obs, model.n_actions)
        if np.array_equal(ref.init_fn, m.init_fn) and np.array_equal(ref.update_fn, m.update_fn):
            return f"kind window {n}"
        return None
    elif _BELIEF_RE.match(m.label):
        k = int(_BELIEF_RE.match(m.label).group(1))
        ref = belief_machine(model, k)
        if np.array_equal(ref.init_fn, m.init_fn) and np.array_equal(ref.update_fn, m.update_fn):
            return f"kind belief {k}"
        return None
    else:
        return None
    if np.array_equal(ref.init_fn, m.init_fn) and np.array_equal(ref.update_fn, m.update_fn):
        return "kind identity"
    return None


def serialize_native(doc: ModelDocument) -> str:
    model = doc.model
    out = ["[model]"]
    out.append(f"states {model.n_states}")
    out.append(f"actions {model.n_actions}")
    out.append(f"obs {model.n_obs}")
    out.append(f"gamma {_fmt(model.gamma)}")
    out.append(f"rmax {_fmt(model.r_max)}")
    out.append("[kernel]")
    for s in range(model.n_states):
        for a in range(model.n_actions):
            for s2 in range(model.n_states):
                for y2 in range(model.n_obs):
                    p = model.kernel[s, a, s2, y2]
                    if p != 0.0:
                        out.append(f"{s} {a} -> {s2} {y2} {_fmt(p)}")
    out.append("[reward]")
    for s in range(model.n_states):
        for a in range(model.n_actions):
            r = model.reward[s, a]
            if r != 0.0:
                out.append(f"{s} {a} {_fmt(r)}")
    out.append("[init]")
    for s in range(model.n_states):
        if model.init_state[s] != 0.0:
            out.append(f"state {s} {_fmt(model.init_state[s])}")
    for s in range(model.n_states):
        for y in range(model.n_obs):
            if model.init_obs[s, y] != 0.0:
                out.append(f"obs {s} {y} {_fmt(model.init_obs[s, y])}")
    for name, m in doc.machines.items():
        out.append(f"[machine {name}]")
        compact = _machine_kind_line(model, m)
        if compact is not None:
            out.append(compact)
            continue
        out.append(f"kind table {m.n_agent_states}")
        if m.label != name:
            out.append(f"label {m.label}")
        for y in range(m.n_obs):
            out.append(f"init {y} {m.init_fn[y]}")
        for z in range(m.n_agent_states):
            for y in range(m.n_obs):
                for a in range(m.n_actions):
                    out.append(f"step {z} {y} {a} {m.update_fn[z, y, a]}")
    if doc.metadata:
        out.append("[meta]")
        for k, v in doc.metadata.items():
            out.append(f"{k} {v}".rstrip())
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------

def serialize_policy(p: Policy, m: AgentStateMachine) -> str:
    for rule in list(p.rules) + [p.tail]:
        if rule.n_agent_states != m.n_agent_states:
            raise ValidationError("policy and machine disagree on |Z|")
    out = ["[policy]"]
    out.append(f"kind {'stationary' if p.is_stationary else 'nonstationary'}")
    out.append(f"agent-states {p.tail.n_agent_states}")
    out.append(f"actions {p.tail.n_actions}")
    if p.is_stationary:
        out.append("[rule]")
        out.extend(_rule_lines(p.tail))
    else:
        out.append(f"horizon {len(p.rules)}")
        for i, rule in enumerate(p.rules):
            out.append(f"[rule {i}]")
            out.extend(_rule_lines(rule))
        out.append("[tail]")
        out.extend(_rule_lines(p.tail))
    return "\n".join(out) + "\n"


def _rule_lines(rule: DecisionRule):
    lines = []
    if rule.is_deterministic:
        lines.append("det")
        for z, a in enumerate(rule.actions):
            lines.append(f"{z} {a}")
    else:
        lines.append("stoch")
        for z in range(rule.n_agent_states):
            probs = " ".join(_fmt(x) for x in rule.probs[z])
            lines.append(f"{z} {probs}")
    return lines


def parse_policy(text: str) -> Policy:
    sections = _Sections(text)
    kind = None
    n_z = n_a = None
    horizon = None
    rules = {}
    tail = None
    stationary_rule = None
    for header, hline, lines in sections.groups:
        if header[0] == "policy":
            for lineno, toks in lines:
                if toks[0] == "kind":
                    kind = toks[1]
                elif toks[0] == "agent-states":
                    n_z = _to_int(toks[1], lineno, "agent-states")
                elif toks[0] == "actions":
                    n_a = _to_int(toks[1], lineno, "actions")
                elif toks[0] == "horizon":
                    horizon = _to_int(toks[1], lineno, "horizon")
                else:
                    raise ParseError(f"unknown policy field {toks[0]!r}", line=lineno)
        elif header[0] == "rule":
            rule = _parse_rule(lines, n_z, n_a, hline)
            if len(header) == 1:
                stationary_rule = rule
            else:
                rules[_to_int(header[1], hline, "rule index")] = rule
        elif header[0] == "tail":
            tail = _parse_rule(lines, n_z, n_a, hline)
        else:
            raise ParseError(f"unknown section {header[0]!r}", line=hline)
    if kind == "stationary":
        if stationary_rule is None:
            raise ParseError("stationary policy needs a [rule] section")
        return Policy.stationary(stationary_rule)
    if kind == "nonstationary":
        if tail is None or horizon is None:
            raise ParseError("nonstationary policy needs horizon and [tail]")
        seq = [rules[i] for i in range(horizon)]
        return Policy.non_stationary(seq, tail)
    raise ParseError(f"unknown policy kind {kind!r}")


def _parse_rule(lines, n_z, n_a, hline) -> DecisionRule:
    if n_z is None or n_a is None:
        raise ParseError("policy header must precede rules", line=hline)
    if not lines:
        raise ParseError("empty rule section", line=hline)
    mode = lines[0][1][0]
    if mode == "det":
        actions = np.zeros(n_z, dtype=np.int64)
        for lineno, toks in lines[1:]:
            actions[_to_int(toks[0], lineno, "z")] = _to_int(toks[1], lineno, "a")
        return DecisionRule.deterministic(actions, n_a)
    if mode == "stoch":
        probs = np.zeros((n_z, n_a))
        row_line = {}
        for lineno, toks in lines[1:]:
            z = _to_int(toks[0], lineno, "z")
            if len(toks) != n_a + 1:
                raise ParseError(f"expected {n_a} probabilities", line=lineno)
            probs[z] = [_to_float(t, lineno, "probability") for t in toks[1:]]
            row_line[(z,)] = lineno
        probs = _normalize_rows(probs, "rule", lambda idx: row_line.get(idx))
        return DecisionRule.stochastic(probs)
    raise ParseError(f"unknown rule mode {mode!r}", line=lines[0][0])


# ---------------------------------------------------------------------------
# Classic .pomdp reader (strict subset)
# ---------------------------------------------------------------------------

def parse_cassandra(text: str) -> PomdpModel:
    """Read the classic research format and assemble the joint kernel
    P(s2, y2 | s, a) = T(s2 | s, a) O(y2 | s2, a).

    Supported: discount, values: reward, states/actions/observations (count
    or names), start (vector, uniform, or a single state), T:/O: entries
    with wildcards and the uniform/identity keywords, and rewards of the
    form `R: a : s : * : * value`.  Anything else raises
    UnsupportedFeatureError naming the construct.  The first observation is
    emitted deterministically as observation 0 (the format does not model an
    initial observation).
    """
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if line.strip():
            lines.append((lineno, line))

    discount = None
    values_seen = False
    names = {}
    start_spec = None
    t_entries = []
    o_entries = []
    r_entries = []
    i = 0

    def tokens(line):
        return line.replace(":", " : ").split()

    def is_number(tok):
        try:
            float(tok)
            return True
        except ValueError:
            return False

    while i < len(lines):
        lineno, line = lines[i]
        toks = tokens(line)
        head = toks[0]
        if head == "discount":
            discount = _to_float(toks[2], lineno, "discount")
        elif head == "values":
            values_seen = True
            if toks[2] != "reward":
                raise UnsupportedFeatureError(f"values: {toks[2]} (only reward supported)")
        elif head in ("states", "actions", "observations"):
            body = toks[2:]
            if len(body) == 1 and body[0].isdigit():
                names[head] = [str(k) for k in range(int(body[0]))]
            else:
                names[head] = body
        elif head == "start":
            if toks[2] in ("include", "exclude"):
                raise UnsupportedFeatureError(f"start {toks[2]}:")
            start_spec = (lineno, toks[2:])
        elif head in ("T", "O", "R"):
            entry, consumed = _collect_entry(lines, i, head)
            {"T": t_entries, "O": o_entries, "R": r_entries}[head].append(entry)
            i += consumed
            continue
        else:
            raise ParseError(f"unknown directive {head!r}", line=lineno)
        i += 1

    if discount is None:
        raise ParseError("missing discount")
    if not values_seen:
        raise ParseError("missing values: reward")
    for key in ("states", "actions", "observations"):
        if key not in names:
            raise ParseError(f"missing {key}")
    S, A, Y = (len(names[k]) for k in ("states", "actions", "observations"))

    def resolve(tok, kind, lineno):
        if tok == "*":
            return None
        if tok.isdigit() and int(tok) < len(names[kind]):
            return int(tok)
        if tok in names[kind]:
            return names[kind].index(tok)
        raise ParseError(f"unknown {kind[:-1]} {tok!r}", line=lineno)

    T = np.zeros((A, S, S))
    O = np.zeros((A, S, Y))
    R = np.zeros((A, S))
    for entry in t_entries:
        _apply_matrix_entry(entry, T, ("actions", "states", "states"), resolve, identity_ok=True)
    for entry in o_entries:
        _apply_matrix_entry(entry, O, ("actions", "states", "observations"), resolve, identity_ok=False)
    for lineno, parts, value in r_entries:
        if len(parts) != 4:
            raise ParseError("rewards must be R: a : s : s2 : o value", line=lineno)
        a, s, s2, o = parts
        if s2 != "*" or o != "*":
            raise UnsupportedFeatureError(
                "next-state or observation dependent reward "
                f"(R: {a} : {s} : {s2} : {o})"
            )
        a_idx = resolve(a, "actions", lineno)
        s_idx = resolve(s, "states", lineno)
        for ai in ([a_idx] if a_idx is not None else range(A)):
            for si in ([s_idx] if s_idx is not None else range(S)):
                R[ai, si] = value

    for what, M, dims in (("T", T, (S, S)), ("O", O, (S, Y))):
        sums = M.sum(axis=2)
        bad = np.argwhere(np.abs(sums - 1.0) > _ROW_TOL)
        if bad.size:
            a, s = bad[0]
            raise ParseError(
                f"{what} row (action {a}, state {s}) sums to {sums[a, s]!r}"
            )
        drift = np.abs(sums - 1.0) > _EXACT_TOL
        if drift.any():
            M /= sums[..., None]

    kernel = np.einsum("ast,aty->saty", T, O)
    reward = R.T.copy()
    if start_spec is None:
        init_state = np.full(S, 1.0 / S)
    else:
        lineno, body = start_spec
        if body == ["uniform"]:
            init_state = np.full(S, 1.0 / S)
        elif len(body) == S and all(is_number(t) for t in body):
            init_state = np.array([float(t) for t in body])
            total = init_state.sum()
            if abs(total - 1.0) > _ROW_TOL:
                raise ParseError(f"start distribution sums to {total!r}", line=lineno)
            if abs(total - 1.0) > _EXACT_TOL:
                init_state = init_state / total
        elif len(body) == 1:
            init_state = np.zeros(S)
            init_state[resolve(body[0], "states", lineno)] = 1.0
        else:
            raise ParseError("unsupported start specification", line=lineno)
    init_obs = np.zeros((S, Y))
    init_obs[:, 0] = 1.0
    try:
        return PomdpModel(S, A, Y, kernel, reward, init_state, init_obs, discount)
    except ValidationError as exc:
        raise ParseError(str(exc)) from exc


def _collect_entry(lines, i, head):
    """Gather one T:/O:/R: directive plus any continuation number rows.

    The colon count decides the form: `T: a : s : s2 p`, `T: a : s row...`,
    or `T: a` followed by keywords or matrix rows.  Numeric tokens are valid
    state/action names, so splitting happens on colons, not on token type.
    """
    lineno, line = lines[i]
    segments = [seg.strip() for seg in line.split(":")]
    groups = segments[1:]
    if not groups or not groups[-1] or not groups[0]:
        raise ParseError(f"malformed {head} directive", line=lineno)
    parts = [g.split()[0] for g in groups[:-1]]
    last = groups[-1].split()
    if head == "R":
        if len(last) == 2:
            parts.append(last[0])
            value = last[1]
        elif len(last) == 1 and len(parts) >= 1:
            value = None if len(parts) < 4 else last[0]
            if value is None:
                parts.append(last[0])
        else:
            raise ParseError("malformed reward entry", line=lineno)
    else:
        # the last colon group is either "name [values...]" or pure values
        if _is_numeric(last[0]) and len(parts) < 2:
            rest = last
        elif last[0] in ("uniform", "identity"):
            rest = last
        else:
            parts.append(last[0])
            rest = last[1:]
    consumed = 1
    cont = []
    k = i + 1
    while k < len(lines):
        nxt = lines[k][1].split()
        ok = nxt and all(_is_numeric(t) for t in nxt)
        if not ok:
            break
        cont.append([float(t) for t in nxt])
        consumed += 1
        k += 1
    if head == "R":
        if len(parts) == 4 and "value" in dir():
            pass
        if len(parts) != 4:
            raise ParseError("rewards must be R: a : s : s2 : o value", line=lineno)
        if "value" not in dir() or value is None:
            if len(cont) == 1 and len(cont[0]) == 1:
                value = cont[0][0]
            else:
                raise ParseError("reward entries carry exactly one value", line=lineno)
        return (lineno, parts, float(value)), consumed
    return (lineno, parts, rest, cont), consumed


def _is_numeric(tok):
    try:
        float(tok)
        return True
    except ValueError:
        return False


def _apply_matrix_entry(entry, M, kinds, resolve, identity_ok):
    """Fill T/O from one directive: full triple, row form, or matrix form."""
    lineno, parts, rest, cont = entry
    n_rows, n_cols = M.shape[1], M.shape[2]
    a_idx = resolve(parts[0], kinds[0], lineno) if parts else None
    a_list = [a_idx] if a_idx is not None else range(M.shape[0])
    if len(parts) == 3:
        row = resolve(parts[1], kinds[1], lineno)
        col = resolve(parts[2], kinds[2], lineno)
        if len(rest) != 1 or not _is_numeric(rest[0]):
            raise ParseError("expected a single probability", line=lineno)
        v = float(rest[0])
        for a in a_list:
            rows = [row] if row is not None else range(n_rows)
            cols = [col] if col is not None else range(n_cols)
            for r_ in rows:
                for c in cols:
                    M[a, r_, c] = v
    elif len(parts) == 2:
        row = resolve(parts[1], kinds[1], lineno)
        if rest and rest[0] == "uniform":
            vals = np.full(n_cols, 1.0 / n_cols)
        elif len(rest) == n_cols:
            vals = np.array([float(t) for t in rest])
        elif not rest and len(cont) == 1 and len(cont[0]) == n_cols:
            vals = np.array(cont[0])
        else:
            raise ParseError("expected a row of probabilities", line=lineno)
        for a in a_list:
            rows = [row] if row is not None else range(n_rows)
            for r_ in rows:
                M[a, r_, :] = vals
    elif len(parts) == 1:
        if rest and rest[0] == "uniform":
            for a in a_list:
                M[a, :, :] = 1.0 / n_cols
        elif rest and rest[0] == "identity":
            if not identity_ok and n_rows != n_cols:
                raise UnsupportedFeatureError("identity for a non-square table")
            if n_rows != n_cols:
                raise ParseError("identity needs a square table", line=lineno)
            for a in a_list:
                M[a, :, :] = np.eye(n_rows)
        elif len(cont) == n_rows and all(len(c) == n_cols for c in cont):
            for a in a_list:
                M[a, :, :] = np.array(cont)
        else:
            raise ParseError("expected a full matrix after the directive", line=lineno)
    else:
        raise ParseError("malformed table directive", line=lineno)
