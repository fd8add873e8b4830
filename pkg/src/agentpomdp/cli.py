"""Command-line front end.

Commands: evaluate, reproduce {fig1,fig2,ordering,asql-demo}, ais-audit.
All outputs are CSV files written atomically (temp file + rename) plus a
short stdout summary.  Exit codes: 0 success, 2 validation/parse error,
3 capacity error.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from dataclasses import replace

import numpy as np

from . import worlds
from .ais import IPMSpec, compute_ais_losses, fit_ais, solve_ais_dp
from .bruteforce import OrderingBudgets, history_dp, verify_ordering
from .core import Policy, PomdpModel
from .designer import xi_init
from .errors import AgentPomdpError, CapacityError, ParseError, UnsupportedFeatureError, ValidationError
from .evaluate import build_product_chain, performance, policy_evaluate
from .gradients import sweep_1param
from .learning import LearningConfig, asql_fixed_point, asql_run
from .model_io import ModelDocument, parse_cassandra, parse_native, parse_policy

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CAPACITY = 3


def _write_atomic(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-agentpomdp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_document(path: str) -> ModelDocument:
    if not os.path.exists(path):
        raise ValidationError(f"model file not found: {path}")
    with open(path) as fh:
        text = fh.read()
    if path.endswith(".pomdp"):
        return ModelDocument(parse_cassandra(text), {}, {})
    return parse_native(text)


def _pick_machine(doc: ModelDocument, name):
    if name is None:
        if len(doc.machines) == 1:
            return next(iter(doc.machines.values()))
        raise ValidationError(
            f"--machine needed; document has {sorted(doc.machines)}"
        )
    if name not in doc.machines:
        raise ValidationError(f"no machine {name!r}; document has {sorted(doc.machines)}")
    return doc.machines[name]


def _with_gamma(model: PomdpModel, gamma) -> PomdpModel:
    if gamma is None:
        return model
    return replace(model, gamma=gamma)


def data_path(name: str) -> str:
    return os.path.join(os.path.dirname(__file__), "data", name)


def cmd_evaluate(args) -> int:
    doc = _load_document(args.model)
    model = _with_gamma(doc.model, args.gamma)
    m = _pick_machine(doc, args.machine)
    with open(args.policy) as fh:
        policy = parse_policy(fh.read())
    if policy.is_stationary:
        chain = build_product_chain(model, m)
        bundle = policy_evaluate(chain, policy.tail, xi_init(model, m).dist, model.gamma)
        _write_atomic(os.path.join(args.out, "eval_bundle.csv"), bundle.to_csv())
        print(f"J = {bundle.j!r}")
        print(f"wrote {os.path.join(args.out, 'eval_bundle.csv')}")
    else:
        perf = performance(model, m, policy, horizon_tol=args.tol)
        print(f"J = {perf.value!r} +- {perf.radius!r}")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    if args.which == "fig2":
        return _reproduce_fig2(args)
    if args.which == "fig1":
        return _reproduce_fig1(args)
    if args.which == "ordering":
        return _reproduce_ordering(args)
    if args.which == "asql-demo":
        return _reproduce_asql(args)
    raise ValidationError(f"unknown reproduction target {args.which!r}")


def _reproduce_fig2(args) -> int:
    model = worlds.fig2_model(args.gamma or 0.9)
    grid = np.round(np.arange(0.0, 1.0 + 1e-9, 0.005), 6)
    curve = sweep_1param(model, grid)
    lines = ["p,J"] + [f"{float(p)!r},{float(j)!r}" for p, j in curve]
    out = os.path.join(args.out, "fig2_sweep.csv")
    _write_atomic(out, "\n".join(lines) + "\n")
    best = curve[np.argmax(curve[:, 1])]
    print(f"endpoints: J(0) = {float(curve[0, 1])!r}, J(1) = {float(curve[-1, 1])!r}")
    print(f"argmax p = {float(best[0])!r}, J = {float(best[1])!r}")
    print(f"wrote {out}")
    return EXIT_OK


def _reproduce_fig1(args) -> int:
    gamma = args.gamma or 0.9
    model = worlds.fig1_model(gamma)
    m = worlds.fig1_machine(gamma)
    from .bruteforce import enumerate_stationary_det, search_nonstationary_det

    _, j_zsd = enumerate_stationary_det(model, m)
    plan, znd = search_nonstationary_det(model, m, args.tol)
    hnd = history_dp(model, horizon=4 * model.n_states, tol=args.tol)
    print(f"J_ZSD = {j_zsd!r}  (closed form {worlds.fig1_stationary_optimum(gamma)!r})")
    print(f"J_ZND in [{znd[0]!r}, {znd[1]!r}]")
    print(f"J_HND in [{hnd.lo!r}, {hnd.hi!r}]")
    print(f"strict gap J_ZND - J_ZSD >= {znd[0] - j_zsd!r}")
    out = os.path.join(args.out, "fig1_summary.csv")
    _write_atomic(
        out,
        "quantity,lo,hi\n"
        f"J_ZSD,{j_zsd!r},{j_zsd!r}\n"
        f"J_ZND,{znd[0]!r},{znd[1]!r}\n"
        f"J_HND,{hnd.lo!r},{hnd.hi!r}\n",
    )
    print(f"wrote {out}")
    return EXIT_OK


def _reproduce_ordering(args) -> int:
    rc = EXIT_OK
    for name, builder, machine_builder, budgets in (
        (
            "fig2",
            lambda: worlds.fig2_model(),
            lambda mdl: worlds.fig2_machine(),
            OrderingBudgets(designer_tol=0.01, history_horizon=40, history_tol=0.01,
                            grid_resolution=0.005),
        ),
        (
            "mdp",
            lambda: worlds.mdp_fixture(gamma=0.5),
            lambda mdl: worlds.mdp_machine(mdl),
            OrderingBudgets(designer_tol=1e-6, history_horizon=60, history_tol=1e-7,
                            grid_resolution=0.25),
        ),
    ):
        model = builder()
        report = verify_ordering(model, machine_builder(model), budgets)
        out = os.path.join(args.out, f"ordering_{name}.csv")
        _write_atomic(out, report.to_csv())
        print(f"[{name}]")
        print(report.to_text(), end="")
        print(f"wrote {out}")
        if not report.ok:
            rc = EXIT_VALIDATION
    return rc


def _reproduce_asql(args) -> int:
    model = worlds.fig2_model(args.gamma or 0.9)
    m = worlds.fig2_machine()
    mu = worlds.uniform_rule(1, 2)
    fp = asql_fixed_point(model, m, mu)
    cfg = LearningConfig(steps=10**6, seed=args.seed, eval_stride=10_000)
    run = asql_run(model, m, mu, cfg)
    curve_out = os.path.join(args.out, "asql_qtrace.csv")
    _write_atomic(curve_out, run.to_csv())
    dist = run.distances_to(fp.q)
    lines = ["step,sup_distance"] + [
        f"{s},{float(d)!r}" for s, d in zip(run.steps_at, dist)
    ]
    dist_out = os.path.join(args.out, "asql_distance.csv")
    _write_atomic(dist_out, "\n".join(lines) + "\n")
    print(f"fixed point Q = {fp.q.ravel().tolist()!r} (residual {fp.residual!r})")
    print(f"final sup distance = {float(dist[-1])!r}")
    print(f"wrote {curve_out}")
    print(f"wrote {dist_out}")
    return EXIT_OK


def cmd_ais_audit(args) -> int:
    doc = _load_document(args.model)
    model = _with_gamma(doc.model, args.gamma)
    m = _pick_machine(doc, args.machine)
    mu = worlds.uniform_rule(m.n_agent_states, model.n_actions)
    ais = fit_ais(model, m, mu)
    if args.ipm == "tv":
        spec = IPMSpec.total_variation()
    else:
        raise ValidationError(f"unsupported IPM {args.ipm!r} (use tv)")
    losses = compute_ais_losses(model, m, ais, spec, horizon=args.horizon)
    sol = solve_ais_dp(ais, model.gamma)
    j_pi = performance(model, m, Policy.stationary(sol.rule)).value
    hnd = history_dp(model, horizon=args.history_horizon, tol=args.tol)
    measured = hnd.hi - j_pi
    out = os.path.join(args.out, "ais_audit.csv")
    _write_atomic(
        out,
        losses.to_csv()
        + f"J_HND_hi,{hnd.hi!r},\nJ_pi,{j_pi!r},\nmeasured_gap,{measured!r},\n",
    )
    print(f"eps = {losses.eps!r}, delta = {losses.delta!r}")
    print(f"bound = {losses.bound!r}")
    print(f"measured gap (J_HND_hi - J_pi) = {measured!r}")
    print("bound holds" if measured <= losses.bound + 1e-9 else "BOUND VIOLATED")
    print(f"wrote {out}")
    return EXIT_OK if measured <= losses.bound + 1e-9 else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agentpomdp",
        description="Planning and learning with agent-state based policies in finite POMDPs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--model", help="path to a .pomdpz or .pomdp file")
        p.add_argument("--machine", help="machine name inside the document")
        p.add_argument("--gamma", type=float, default=None, help="override the discount")
        p.add_argument("--tol", type=float, default=1e-3, help="value tolerance")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=".", help="output directory")

    p_eval = sub.add_parser("evaluate", help="evaluate a policy file on a model")
    common(p_eval)
    p_eval.add_argument("--policy", required=True, help="path to a policy file")
    p_eval.set_defaults(fn=cmd_evaluate, needs_model=True)

    p_rep = sub.add_parser("reproduce", help="rebuild the bundled study outputs")
    p_rep.add_argument("which", choices=["fig1", "fig2", "ordering", "asql-demo"])
    common(p_rep)
    p_rep.set_defaults(fn=cmd_reproduce, needs_model=False)

    p_audit = sub.add_parser("ais-audit", help="loss/bound audit of a fitted agent-state model")
    common(p_audit)
    p_audit.add_argument("--ipm", default="tv")
    p_audit.add_argument("--horizon", type=int, default=8, help="loss enumeration horizon")
    p_audit.add_argument("--history-horizon", type=int, default=30)
    p_audit.set_defaults(fn=cmd_ais_audit, needs_model=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "needs_model", False) and not args.model:
        print("error: --model is required for this command", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return args.fn(args)
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (ValidationError, ParseError, UnsupportedFeatureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except AgentPomdpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
