"""Command-line surface.

Subcommands: decompose, synthesize, evaluate, simulate, casestudy.  Outputs
are machine-readable JSON (schema effsynth/1) with a run manifest (input
hashes, version, seed, active numeric knobs).  Exit codes: 0 ok, 2 parse or
validation failure (also argparse usage errors), 3 task unsatisfiable,
4 solver failure.
"""

import argparse
import hashlib
import json
import sys

from . import __version__
from .model import AlphabetMismatch, ModelError, PolicyMismatch, build_product, \
    induce_chain
from . import casestudies, chain, graph, lp, parsers, sim, synthesis

EXIT_PARSE = 2
EXIT_UNSAT = 3
EXIT_SOLVER = 4

PARSE_ERRORS = (parsers.ParseError, parsers.ValidationError, ModelError,
                AlphabetMismatch, PolicyMismatch, casestudies.ParamError)
UNSAT_ERRORS = (synthesis.TaskUnsatisfiable, synthesis.NoMaec)
SOLVER_ERRORS = (lp.NumericalFailure, lp.InfeasibleError, lp.NotCommunicating,
                 chain.SingularSystem, chain.NotUnichain, graph.Unreachable)


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        h.update(f.read())
    return h.hexdigest()


def _manifest(args, paths):
    knobs = {
        "prob_tol": 1e-9,
        "algebra_tol": 1e-12,
        "support_threshold": getattr(args, "tol_support", 1e-9),
        "bisect_width": getattr(args, "tol_bisect", 1e-6),
        "k_margin": getattr(args, "k_margin", 1.0),
    }
    return {
        "version": __version__,
        "inputs": {p: _sha256(p) for p in paths if p},
        "seed": getattr(args, "seed", None),
        "knobs": knobs,
    }


def _emit(payload, out_path):
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out_path:
        with open(out_path, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _load_problem(args):
    with open(args.mdp) as f:
        m = parsers.parse_mdp(f.read())
    with open(args.dra) as f:
        d = parsers.parse_dra(f.read())
    pm = build_product(m, d)
    return m, d, pm


def _load_utilities(args, pm):
    with open(args.rewards) as f:
        text = f.read()
    base = parsers.parse_mdp(open(args.mdp).read())
    reward, cost = parsers.parse_utilities(text, base)
    if reward is None or cost is None:
        raise parsers.ParseError("utility file must define reward and cost")
    # lift base-state utilities onto the product through its components
    r_vals = {}
    c_vals = {}
    for i, (s, q) in enumerate(pm.components):
        for a in pm.available[i]:
            r_vals[(i, a)] = reward(s, a)
            c_vals[(i, a)] = cost(s, a)
    from .model import UtilityFn
    return UtilityFn(r_vals, "reward"), UtilityFn(c_vals, "cost")


def _ec_json(m, ec):
    return {"states": [m.state_names[s] for s in sorted(ec.state_set)],
            "actions": {m.state_names[s]: [m.action_names[a] for a in sorted(acts)]
                        for s, acts in ec.act}}


def cmd_decompose(args):
    m, d, pm = _load_problem(args)
    mecs = graph.mec_decompose(pm)
    maecs = graph.maec_decompose(pm)
    amecs = graph.amec_filter(pm)
    region = graph.almost_sure_region(pm)
    payload = {
        "schema": "effsynth/1",
        "mecs": [_ec_json(pm, ec) for ec in mecs],
        "maecs": [_ec_json(pm, ec) for ec in maecs],
        "amecs": [_ec_json(pm, ec) for ec in amecs],
        "almost_sure_region": [pm.state_names[s] for s in sorted(region)],
        "initial_in_region": pm.initial in region,
        "manifest": _manifest(args, [args.mdp, args.dra]),
    }
    _emit(payload, args.out)
    if not amecs:
        print("task unsatisfiable: no accepting end component", file=sys.stderr)
        return EXIT_UNSAT
    return 0


def _report_json(pm, report):
    cert = report.certificate
    return {
        "value": report.value,
        "epsilon": report.epsilon,
        "component_values": list(report.amec_values),
        "component_chosen": report.amec_chosen,
        "no_perturbation": report.no_perturbation,
        "delta": report.plan.delta if report.plan else 0.0,
        "method": report.plan.method if report.plan else None,
        "d_inf": report.plan.d_inf if report.plan else None,
        "c_min": report.plan.c_min if report.plan else None,
        "avg_gain": report.avg_gain,
        "certificate": {
            "recurrent_classes": [[pm.state_names[s] for s in comp]
                                  for comp in cert.recurrent_classes],
            "witness_pairs": list(cert.witness_pairs),
            "absorption_defect": cert.absorption_defect,
            "accepted": cert.accepted,
        },
    }


def _apply_knobs(args):
    """Numeric knobs are module-level defaults; the CLI overrides them for
    the whole (single-threaded) run."""
    if getattr(args, "tol_support", None) is not None:
        lp.SUPPORT_THRESHOLD = args.tol_support
    if getattr(args, "tol_bisect", None) is not None:
        synthesis.BISECT_WIDTH = args.tol_bisect
    if getattr(args, "k_margin", None) is not None:
        synthesis.K_MARGIN = args.k_margin


def cmd_synthesize(args):
    _apply_knobs(args)
    m, d, pm = _load_problem(args)
    r, c = _load_utilities(args, pm)
    report = synthesis.synth_general(pm, r, c, args.epsilon, args.method)
    policy_text = parsers.write_policy(pm, report.policy, report)
    if args.out:
        with open(args.out, "w") as f:
            f.write(policy_text)
    payload = {"schema": "effsynth/1",
               "report": _report_json(pm, report),
               "policy_file": args.out,
               "manifest": _manifest(args, [args.mdp, args.dra, args.rewards])}
    _emit(payload, args.report_out)
    return 0


def _policy_scope(pm, policy, r, c):
    """Restrict the product to the policy's domain when the policy is partial
    (synthesis defines it on the almost-sure region only).  The domain must
    contain the initial state and be closed under the policy's support."""
    dom = set(policy.rule)
    if dom >= set(range(pm.n_states)):
        return pm, policy, r, c
    if pm.initial not in dom:
        raise PolicyMismatch("policy does not cover the initial state")
    for s in dom:
        for a, w in policy.dist(s).items():
            if w > 0.0 and any(t not in dom and p > 0.0
                               for t, p in pm.succ(s, a).items()):
                raise PolicyMismatch(
                    f"policy leaves its own domain at {pm.state_names[s]}")
    acts = {s: {a for a in pm.available[s]
                if all(t in dom for t, p in pm.succ(s, a).items() if p > 0.0)}
            for s in dom}
    sub_pm, ids = graph.restrict(pm, graph.SubMdp.make(dom, acts),
                                 initial=pm.initial)
    id_of = {g: i for i, g in enumerate(ids)}
    local = type(policy)({id_of[s]: dist for s, dist in policy.rule.items()})
    return sub_pm, local, r.restricted(ids, id_of), c.restricted(ids, id_of)


def cmd_evaluate(args):
    m, d, pm = _load_problem(args)
    r, c = _load_utilities(args, pm)
    with open(args.policy) as f:
        policy = parsers.parse_policy(f.read(), pm)
    pm, policy, r, c = _policy_scope(pm, policy, r, c)
    ca = chain.analyze(induce_chain(pm, policy))
    eff = chain.efficiency(ca, pm, r, c, policy, pm.initial)
    classes = []
    sat_mass = 0.0
    for k, comp in enumerate(ca.recurrent_classes):
        states = set(comp)
        witness = None
        for i, (b, g) in enumerate(pm.acc_pairs):
            if not (states & b) and (states & g):
                witness = i
                break
        mass = float(ca.absorb[pm.initial, k])
        if witness is not None:
            sat_mass += mass
        classes.append({"states": [pm.state_names[s] for s in comp],
                        "witness_pair": witness, "mass_from_initial": mass})
    payload = {"schema": "effsynth/1",
               "efficiency": eff,
               "recurrent_classes": classes,
               "satisfaction_probability": sat_mass,
               "accepted_wp1": abs(sat_mass - 1.0) <= 1e-9,
               "manifest": _manifest(args,
                                     [args.mdp, args.dra, args.rewards,
                                      args.policy])}
    _emit(payload, args.out)
    return 0


def cmd_simulate(args):
    m, d, pm = _load_problem(args)
    r, c = _load_utilities(args, pm)
    with open(args.policy) as f:
        policy = parsers.parse_policy(f.read(), pm)
    pm, policy, r, c = _policy_scope(pm, policy, r, c)
    cfg = sim.RolloutConfig(steps=args.steps, rollouts=args.rollouts,
                            seed=args.seed)
    stats = sim.simulate(pm, policy, r, c, cfg)
    visits = sim.acceptance_visits(pm, policy, cfg)
    if args.csv:
        lines = ["rollout,ratio"]
        for i, ratio in enumerate(stats.ratios):
            lines.append(f"{i},{ratio:.12g}")
        lines.append(f"mean,{stats.mean_ratio:.12g}")
        lines.append(f"stderr,{stats.stderr:.12g}")
        text = "\n".join(lines) + "\n"
        if args.out:
            with open(args.out, "w") as f:
                f.write(text)
        else:
            sys.stdout.write(text)
        return 0
    payload = {"schema": "effsynth/1",
               "mean_ratio": stats.mean_ratio,
               "stderr": stats.stderr,
               "ratios": list(stats.ratios),
               "label_freq": stats.label_freq,
               "acceptance_visits": [{"pair": k, "g_visits": g, "b_visits": b}
                                     for k, (g, b) in enumerate(visits)],
               "manifest": _manifest(args,
                                     [args.mdp, args.dra, args.rewards,
                                      args.policy])}
    _emit(payload, args.out)
    return 0


def cmd_casestudy(args):
    import os
    os.makedirs(args.out_dir, exist_ok=True)
    params = None
    if args.params:
        with open(args.params) as f:
            raw = json.load(f)
        if args.name == "case1":
            if "item_prob" in raw:
                raw["item_prob"] = {tuple(map(int, k.split(","))): v
                                    for k, v in raw["item_prob"].items()}
            if "obstacles" in raw:
                raw["obstacles"] = frozenset(tuple(x) for x in raw["obstacles"])
            if "destinations" in raw:
                raw["destinations"] = {tuple(map(int, k.split(","))): v
                                       for k, v in raw["destinations"].items()}
            if "cost_table" in raw:
                raw["cost_table"] = {int(k): v
                                     for k, v in raw["cost_table"].items()}
            for key in ("initial", "charging"):
                if key in raw:
                    raw[key] = tuple(raw[key])
            params = casestudies.Case1Params(**raw)
        else:
            for key in ("command", "material", "initial"):
                if key in raw:
                    raw[key] = tuple(raw[key])
            params = casestudies.Case2Params(**raw)

    def path(name):
        import os.path
        return os.path.join(args.out_dir, name)

    if args.name == "case1":
        m, d1, d2, reward, cost = casestudies.gen_case1(params)
        with open(path("model.mdp"), "w") as f:
            f.write(parsers.write_mdp(m))
        with open(path("task1.hoa"), "w") as f:
            f.write(parsers.write_dra(d1))
        with open(path("task2.hoa"), "w") as f:
            f.write(parsers.write_dra(d2))
        with open(path("utilities.txt"), "w") as f:
            f.write(parsers.write_utilities(m, reward, cost))
        tables = _case1_tables(m, d2, reward, cost, args)
        with open(path("perturbation_tables.csv"), "w") as f:
            f.write(tables)
        _emit({"schema": "effsynth/1", "generated": ["model.mdp", "task1.hoa",
                                                     "task2.hoa", "utilities.txt",
                                                     "perturbation_tables.csv"],
               "manifest": _manifest(args, [args.params])}, None)
    else:
        m, d, reward_family, cost = casestudies.gen_case2(params)
        with open(path("model.mdp"), "w") as f:
            f.write(parsers.write_mdp(m))
        with open(path("task.hoa"), "w") as f:
            f.write(parsers.write_dra(d))
        with open(path("utilities_bonus0.txt"), "w") as f:
            f.write(parsers.write_utilities(m, reward_family(0.0), cost))
        sweep = _case2_sweep(m, d, reward_family, cost, args)
        with open(path("bonus_sweep.csv"), "w") as f:
            f.write(sweep)
        _emit({"schema": "effsynth/1", "generated": ["model.mdp", "task.hoa",
                                                     "utilities_bonus0.txt",
                                                     "bonus_sweep.csv"],
               "manifest": _manifest(args, [args.params])}, None)
    return 0


def _case1_tables(m, dra, reward, cost, args):
    """ES/EX perturbation degree and charging-cell limit probability per
    threshold, in the shape of the source tables."""
    pm = build_product(m, dra)
    r_vals = {}
    c_vals = {}
    for i, (s, q) in enumerate(pm.components):
        for a in pm.available[i]:
            r_vals[(i, a)] = reward(s, a)
            c_vals[(i, a)] = cost(s, a)
    from .model import UtilityFn
    r = UtilityFn(r_vals, "reward")
    c = UtilityFn(c_vals, "cost")
    thresholds = [0.005, 0.01, 0.05, 0.1]
    rows = {"es": [], "ex": []}
    limits = {"es": [], "ex": []}
    charge_states = [i for i, (s, q) in enumerate(pm.components)
                     if "c" in pm.labels[i]]
    for method in ("es", "ex"):
        for eps in thresholds:
            rep = synthesis.synth_general(pm, r, c, eps, method)
            delta = rep.plan.delta if rep.plan else 0.0
            ca = chain.analyze(induce_chain(pm, rep.policy))
            limit = chain.limit_distribution(ca)
            rows[method].append(delta)
            limits[method].append(float(limit[charge_states].sum()))
    out = ["table,threshold," + ",".join(str(t) for t in thresholds)]
    out.append("delta,es," + ",".join(f"{x:.6g}" for x in rows["es"]))
    out.append("delta,ex," + ",".join(f"{x:.6g}" for x in rows["ex"]))
    out.append("charge_limit,es," + ",".join(f"{x:.6g}" for x in limits["es"]))
    out.append("charge_limit,ex," + ",".join(f"{x:.6g}" for x in limits["ex"]))
    return "\n".join(out) + "\n"


def _case2_sweep(m, dra, reward_family, cost, args):
    """Optimal unconstrained efficiency when sweeping the pickup bonus, and
    whether the optimal loop is the accepting one."""
    from .lp import solve_ratio_lfp, decode_ratio_policy
    out = ["bonus,value,accepting_loop"]
    for bonus in args.bonus_grid:
        r = reward_family(bonus)
        sol = solve_ratio_lfp(m, r, cost)
        policy = decode_ratio_policy(m, sol)
        ca = chain.analyze(induce_chain(m, policy))
        rec = set(ca.recurrent_classes[0])
        labs = set()
        for s in rec:
            labs |= m.labels[s]
        accepting = "g" in labs and "r" in labs
        out.append(f"{bonus:.6g},{sol.value:.10g},{int(accepting)}")
    return "\n".join(out) + "\n"


def _positive_float(text):
    val = float(text)
    if val <= 0.0:
        raise argparse.ArgumentTypeError("must be strictly positive")
    return val


def _positive_int(text):
    val = int(text)
    if val <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return val


def make_parser():
    top = argparse.ArgumentParser(
        prog="effsynth",
        description="Efficiency-optimal policy synthesis under Rabin "
                    "acceptance constraints")
    top.add_argument("--version", action="version", version=__version__)
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="print MECs, MAECs, AMECs, region")
    p.add_argument("mdp")
    p.add_argument("dra")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_decompose)

    p = sub.add_parser("synthesize", help="full synthesis pipeline")
    p.add_argument("mdp")
    p.add_argument("dra")
    p.add_argument("rewards")
    p.add_argument("--epsilon", type=_positive_float, required=True)
    p.add_argument("--method", choices=("es", "ex"), default="es")
    p.add_argument("--out", help="policy file destination")
    p.add_argument("--report-out", help="JSON report destination")
    p.add_argument("--tol-support", type=float, default=1e-9)
    p.add_argument("--tol-bisect", type=float, default=1e-6)
    p.add_argument("--k-margin", type=float, default=1.0)
    p.set_defaults(fn=cmd_synthesize)

    p = sub.add_parser("evaluate", help="analytic efficiency and acceptance")
    p.add_argument("mdp")
    p.add_argument("dra")
    p.add_argument("rewards")
    p.add_argument("policy")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("simulate", help="Monte-Carlo rollout statistics")
    p.add_argument("mdp")
    p.add_argument("dra")
    p.add_argument("rewards")
    p.add_argument("policy")
    p.add_argument("--steps", type=_positive_int, default=100000)
    p.add_argument("--rollouts", type=_positive_int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", action="store_true")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("casestudy", help="generate benchmark instances")
    p.add_argument("name", choices=("case1", "case2"))
    p.add_argument("--params", help="JSON parameter file")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--bonus-grid", type=float, nargs="+",
                   default=[0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 80.0])
    p.set_defaults(fn=cmd_casestudy)
    return top


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        return args.fn(args)
    except PARSE_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except UNSAT_ERRORS as e:
        print(f"task unsatisfiable: {e}", file=sys.stderr)
        return EXIT_UNSAT
    except SOLVER_ERRORS as e:
        print(f"solver failure: {e}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
