"""Policy synthesis: maximize long-run reward-to-cost efficiency while the
Rabin condition holds with probability one.

The communicating solver decomposes the model into maximal accepting end
components, solves the ratio program in each, and then blends the winning
component's optimal policy with an irreducible one.  The mixing weight (the
perturbation degree) is either the closed-form bound from the deviation
vectors ('es') or the largest weight that bisection certifies to stay within
epsilon of optimal ('ex').  The general solver scores every accepting
component that way, turns the scores into a surrogate reward with a steeply
negative off-component level, solves the average-reward program for a basic
policy, and patches the component policies back in wherever the basic policy
settles.
"""

from dataclasses import dataclass

import numpy as np

from .model import Mdp, ProductMdp, StationaryPolicy, UtilityFn, induce_chain
from .graph import (EndComponent, almost_sure_region, amec_filter,
                    attractor_policy, maec_decompose, restrict)
from .chain import (NotUnichain, analyze, average_utility, deviation_vector,
                    efficiency)
from .lp import decode_avg_policy, decode_ratio_policy, solve_avg_reward_lp, \
    solve_ratio_lfp

BISECT_WIDTH = 1e-6
DELTA_CAP = 1.0 - 1e-9
K_MARGIN = 1.0


class NoMaec(Exception):
    """No accepting end component: the task cannot be met from anywhere."""


class TaskUnsatisfiable(Exception):
    """The initial state admits no almost-sure satisfying policy."""


@dataclass(frozen=True)
class PerturbationPlan:
    """How an optimal policy was blended with an irreducible one.

    method 'estimated' uses delta = epsilon * c_min / d_inf; 'exact' bisects on
    the analytic efficiency.  degenerate marks d_inf = 0 (the two policies are
    equivalent, so no perturbation loss exists and delta defaults to 0.5).
    """
    mu_opt: StationaryPolicy
    mu_irr: StationaryPolicy
    delta: float
    method: str
    d_inf: float
    c_min: float
    degenerate: bool = False


@dataclass(frozen=True)
class Certificate:
    """Witness that the synthesized chain satisfies the acceptance condition.

    Every recurrent class is listed with the Rabin pair it satisfies; the
    absorption defect is 1 minus the least total probability, over states, of
    reaching the recurrent classes.
    """
    recurrent_classes: tuple
    witness_pairs: tuple
    absorption_defect: float

    @property
    def accepted(self):
        return all(k is not None for k in self.witness_pairs) and \
            self.absorption_defect <= 1e-9


@dataclass(frozen=True)
class SynthesisReport:
    policy: StationaryPolicy
    value: float
    epsilon: float
    amec_values: tuple
    amec_chosen: int | None
    plan: PerturbationPlan | None
    no_perturbation: bool
    certificate: Certificate
    avg_gain: float | None = None  # general case: surrogate-reward LP gain


def uniform_irreducible_policy(sub: EndComponent) -> StationaryPolicy:
    """Uniform over the component's action sets; irreducible inside it."""
    return StationaryPolicy(
        {s: {a: 1.0 / len(acts) for a in acts} for s, acts in sub.act})


def _min_cost(m: Mdp, c: UtilityFn):
    return min(c(s, a) for s, a in m.state_action_pairs())


def _deviation_gap(m, mu_opt, mu_irr, r, c):
    """d_inf and the optimal efficiency for the estimated-degree bound."""
    ca = analyze(induce_chain(m, mu_opt))
    if not ca.is_unichain():
        raise NotUnichain("optimal policy must induce a unichain")
    j_opt = efficiency(ca, m, r, c, mu_opt, m.initial)
    d_r = deviation_vector(m, mu_opt, mu_irr, r).d
    d_c = deviation_vector(m, mu_opt, mu_irr, c).d
    d_inf = float(np.max(np.abs(d_r - j_opt * d_c)))
    return d_inf, j_opt


def perturbation_degree_estimated(m: Mdp, mu_opt, mu_irr, r, c,
                                  epsilon) -> PerturbationPlan:
    """Closed-form degree: delta = epsilon * c_min / d_inf, capped below one.

    Guarantees the blended policy loses at most epsilon of efficiency.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    d_inf, _ = _deviation_gap(m, mu_opt, mu_irr, r, c)
    c_min = _min_cost(m, c)
    if d_inf <= 1e-14:
        return PerturbationPlan(mu_opt, mu_irr, 0.5, "estimated",
                                d_inf, c_min, degenerate=True)
    delta = min(epsilon * c_min / d_inf, DELTA_CAP)
    return PerturbationPlan(mu_opt, mu_irr, delta, "estimated", d_inf, c_min)


def perturbation_degree_exact(m: Mdp, mu_opt, mu_irr, r, c, epsilon,
                              width=None) -> PerturbationPlan:
    """Largest degree that keeps the blended efficiency within epsilon,
    found by bisection on the analytic evaluator and verified afterwards."""
    if width is None:
        width = BISECT_WIDTH
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    ca = analyze(induce_chain(m, mu_opt))
    if not ca.is_unichain():
        raise NotUnichain("optimal policy must induce a unichain")
    j_opt = efficiency(ca, m, r, c, mu_opt, m.initial)
    d_inf, _ = _deviation_gap(m, mu_opt, mu_irr, r, c)
    c_min = _min_cost(m, c)

    def qualifies(delta):
        mu_d = mu_opt.mix(mu_irr, delta)
        ca_d = analyze(induce_chain(m, mu_d))
        return efficiency(ca_d, m, r, c, mu_d, m.initial) >= j_opt - epsilon - 1e-12

    hi = 1.0 - width
    if qualifies(hi):
        return PerturbationPlan(mu_opt, mu_irr, hi, "exact", d_inf, c_min,
                                degenerate=d_inf <= 1e-14)
    # warm start from the closed-form bound, which always qualifies
    lo = 0.0
    if d_inf > 1e-14:
        guess = min(epsilon * c_min / d_inf, hi / 2)
        if qualifies(guess):
            lo = guess
    hi_b = hi
    while hi_b - lo > width:
        mid = 0.5 * (lo + hi_b)
        if qualifies(mid):
            lo = mid
        else:
            hi_b = mid
    if lo <= 0.0:
        probe = width
        while probe > 1e-15 and not qualifies(probe):
            probe /= 10.0
        lo = probe
    if not qualifies(lo):
        raise NotUnichain("bisection failed to certify any positive degree")
    return PerturbationPlan(mu_opt, mu_irr, lo, "exact", d_inf, c_min,
                            degenerate=d_inf <= 1e-14)


def _certificate(pm: ProductMdp, policy: StationaryPolicy) -> Certificate:
    ca = analyze(induce_chain(pm, policy))
    witnesses = []
    for comp in ca.recurrent_classes:
        states = set(comp)
        found = None
        for k, (b, g) in enumerate(pm.acc_pairs):
            if not (states & b) and (states & g):
                found = k
                break
        witnesses.append(found)
    defect = float(1.0 - ca.absorb.sum(axis=1).min())
    return Certificate(recurrent_classes=ca.recurrent_classes,
                       witness_pairs=tuple(witnesses),
                       absorption_defect=abs(defect))


def _lift(policy: StationaryPolicy, ids):
    return StationaryPolicy({ids[s]: d for s, d in policy.rule.items()})


def _recurrent_class_global(sub_m, ids, policy):
    ca = analyze(induce_chain(sub_m, policy))
    return [set(ids[s] for s in comp) for comp in ca.recurrent_classes]


def synth_communicating(pm: ProductMdp, r: UtilityFn, c: UtilityFn,
                        epsilon: float, method: str = "es",
                        mu_irr_factory=None) -> SynthesisReport:
    """Epsilon-optimal synthesis for a communicating model.

    Solves the ratio program in every maximal accepting end component, keeps
    the best one, and blends its optimal policy with an irreducible one unless
    the optimal policy's recurrent class already witnesses acceptance (then no
    perturbation is needed).  States outside the winning component reach it
    w.p.1 through the peeling assignment.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if method not in ("es", "ex"):
        raise ValueError("method must be 'es' or 'ex'")
    maecs = maec_decompose(pm)
    if not maecs:
        raise NoMaec("no accepting end component")

    values = []
    opt_policies = []
    subs = []
    for maec in maecs:
        sub_m, ids = restrict(pm, maec)
        id_of = {g: i for i, g in enumerate(ids)}
        r_sub = r.restricted(ids, id_of)
        c_sub = c.restricted(ids, id_of)
        sol = solve_ratio_lfp(sub_m, r_sub, c_sub)
        values.append(sol.value)
        opt_policies.append(decode_ratio_policy(sub_m, sol))
        subs.append((sub_m, ids, id_of, r_sub, c_sub))
    best = max(range(len(maecs)), key=lambda i: (values[i], -i))

    sub_m, ids, id_of, r_sub, c_sub = subs[best]
    mu_opt = opt_policies[best]

    # adopt the optimal policy unperturbed when its recurrent class already
    # meets some G-set while avoiding the paired B-set
    rec_global = _recurrent_class_global(sub_m, ids, mu_opt)[0]
    no_pert = any(not (rec_global & b) and (rec_global & g)
                  for b, g in pm.acc_pairs)
    plan = None
    if no_pert:
        mu_final_sub = mu_opt
    else:
        if mu_irr_factory is None:
            mu_irr = StationaryPolicy.uniform(sub_m)
        else:
            mu_irr = mu_irr_factory(sub_m, ids)
        pick = (perturbation_degree_estimated if method == "es"
                else perturbation_degree_exact)
        plan = pick(sub_m, mu_opt, mu_irr, r_sub, c_sub, epsilon)
        mu_final_sub = mu_opt.mix(mu_irr, plan.delta)

    lifted = _lift(mu_final_sub, ids)
    policy = attractor_policy(pm, set(ids), lifted)
    cert = _certificate(pm, policy)
    return SynthesisReport(policy=policy, value=values[best], epsilon=epsilon,
                           amec_values=tuple(values), amec_chosen=best,
                           plan=plan, no_perturbation=no_pert,
                           certificate=cert)


def build_reward_k(pm: ProductMdp, amecs, values, r: UtilityFn,
                   c: UtilityFn):
    """Surrogate reward: the component's optimal value inside each accepting
    component, and K = -max|R|/min C - 1 everywhere else."""
    r_hat = max(abs(r(s, a)) for s, a in pm.state_action_pairs())
    c_hat = _min_cost(pm, c)
    big_k = -r_hat / c_hat - K_MARGIN
    owner = {}
    for i, amec in enumerate(amecs):
        for s, acts in amec.act:
            for a in acts:
                owner[(s, a)] = i
    vals = {}
    for s, a in pm.state_action_pairs():
        i = owner.get((s, a))
        vals[(s, a)] = values[i] if i is not None else big_k
    return UtilityFn(vals, "reward"), big_k


def synth_general(pm: ProductMdp, r: UtilityFn, c: UtilityFn, epsilon: float,
                  method: str = "es") -> SynthesisReport:
    """Epsilon-optimal synthesis for arbitrary (multichain) models.

    States outside the almost-sure region are dropped first (they can never
    witness the acceptance condition with probability one; keeping them would
    plant non-accepting recurrent classes under any policy).  The returned
    policy is therefore defined exactly on the region.  Each accepting
    component is solved as a communicating instance; the component values
    become a surrogate reward whose average-reward optimum decides where to
    settle; the component policies overwrite the basic policy wherever it is
    recurrent.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    amecs = amec_filter(pm)
    if not amecs:
        raise TaskUnsatisfiable("no accepting end component")
    region = almost_sure_region(pm)
    if pm.initial not in region:
        raise TaskUnsatisfiable(
            "initial state cannot satisfy the task with probability one")
    if len(region) < pm.n_states:
        from .graph import SubMdp
        acts = {s: {a for a in pm.available[s]
                    if all(t in region
                           for t, p in pm.succ(s, a).items() if p > 0.0)}
                for s in region}
        rm, rids = restrict(pm, SubMdp.make(region, acts), initial=pm.initial)
        id_of = {g: i for i, g in enumerate(rids)}
        rep = synth_general(rm, r.restricted(rids, id_of),
                            c.restricted(rids, id_of), epsilon, method)
        cert = Certificate(
            recurrent_classes=tuple(tuple(rids[s] for s in comp)
                                    for comp in
                                    rep.certificate.recurrent_classes),
            witness_pairs=rep.certificate.witness_pairs,
            absorption_defect=rep.certificate.absorption_defect)
        return SynthesisReport(policy=_lift(rep.policy, rids),
                               value=rep.value, epsilon=epsilon,
                               amec_values=rep.amec_values,
                               amec_chosen=rep.amec_chosen, plan=rep.plan,
                               no_perturbation=rep.no_perturbation,
                               certificate=cert, avg_gain=rep.avg_gain)

    sub_reports = []
    values = []
    for amec in amecs:
        sub_m, ids = restrict(pm, amec)
        id_of = {g: i for i, g in enumerate(ids)}
        rep = synth_communicating(sub_m, r.restricted(ids, id_of),
                                  c.restricted(ids, id_of), epsilon, method)
        sub_reports.append((rep, ids))
        values.append(rep.value)

    if len(amecs) == 1 and len(amecs[0].state_set) == pm.n_states:
        # single accepting component covering everything: the basic-policy
        # stage cannot change anything, reuse the component solution directly
        rep, ids = sub_reports[0]
        policy = _lift(rep.policy, ids)
        cert = _certificate(pm, policy)
        return SynthesisReport(policy=policy, value=values[0], epsilon=epsilon,
                               amec_values=tuple(values), amec_chosen=0,
                               plan=rep.plan,
                               no_perturbation=rep.no_perturbation,
                               certificate=cert, avg_gain=None)

    rk, _ = build_reward_k(pm, amecs, values, r, c)
    lp_sol = solve_avg_reward_lp(pm, rk)
    mu_k = decode_avg_policy(pm, lp_sol)
    ca_k = analyze(induce_chain(pm, mu_k))
    recurrent = {s for comp in ca_k.recurrent_classes for s in comp}
    claimed = average_utility(ca_k, pm, rk, mu_k, pm.initial)

    policy = mu_k
    kept = []
    for i, amec in enumerate(amecs):
        if amec.state_set & recurrent:
            rep, ids = sub_reports[i]
            policy = policy.extended(_lift(rep.policy, ids).rule)
            kept.append(i)
    cert = _certificate(pm, policy)
    kept_reports = [sub_reports[i][0] for i in kept]
    return SynthesisReport(policy=policy, value=float(claimed),
                           epsilon=epsilon, amec_values=tuple(values),
                           amec_chosen=kept[0] if len(kept) == 1 else None,
                           plan=(kept_reports[0].plan
                                 if len(kept_reports) == 1 else None),
                           no_perturbation=all(r.no_perturbation
                                               for r in kept_reports),
                           certificate=cert, avg_gain=lp_sol.gain)
