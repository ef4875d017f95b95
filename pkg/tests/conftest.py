"""Shared fixtures: random instance generators and brute-force oracles.

The oracles deliberately avoid the library's solver paths: end components are
found by enumerating every sub-MDP, optimal ratios by enumerating every
deterministic stationary policy (a valid oracle because a deterministic
stationary optimum always exists for this criterion), reachability values by
per-policy linear solves.
"""

import itertools

import numpy as np
import pytest

from effsynth.model import Mdp, ProductMdp, StationaryPolicy, UtilityFn, \
    induce_chain
from effsynth.graph import strongly_connected_components, is_communicating
from effsynth.chain import analyze, efficiency, average_utility


def example1_mdp():
    """The four-state two-action illustration instance (states named 1..4)."""
    trans = {
        (0, 0): {1: 1.0},   # 1 -a1-> 2
        (0, 1): {2: 1.0},   # 1 -a2-> 3
        (1, 0): {1: 1.0},   # 2 -a1-> 2
        (2, 0): {3: 1.0},   # 3 -a1-> 4
        (3, 0): {2: 1.0},   # 4 -a1-> 3
        (3, 1): {3: 1.0},   # 4 -a2-> 4
    }
    return Mdp(["1", "2", "3", "4"], ["a1", "a2"], 0, trans)


def example1_product():
    """Example-1 viewed as a product with the single pair (B={3}, G={4})."""
    m = example1_mdp()
    return ProductMdp(m.state_names, m.action_names, m.initial, m.trans,
                      [({2}, {3})])


def random_mdp(rng, n_states, n_actions, p_avail=0.75, max_branch=3):
    """Random MDP; every state keeps at least one action."""
    trans = {}
    for s in range(n_states):
        acts = [a for a in range(n_actions) if rng.random() < p_avail]
        if not acts:
            acts = [int(rng.integers(n_actions))]
        for a in acts:
            k = int(rng.integers(1, max_branch + 1))
            succs = rng.choice(n_states, size=min(k, n_states), replace=False)
            probs = rng.dirichlet(np.ones(len(succs)))
            trans[(s, a)] = {int(t): float(p) for t, p in zip(succs, probs)}
    names = [f"s{i}" for i in range(n_states)]
    return Mdp(names, [f"a{j}" for j in range(n_actions)],
               int(rng.integers(n_states)), trans)


def random_communicating_mdp(rng, n_states, n_actions, **kw):
    for _ in range(200):
        m = random_mdp(rng, n_states, n_actions, **kw)
        if is_communicating(m):
            return m
    raise RuntimeError("could not draw a communicating instance")


def random_product(rng, n_states, n_actions, n_pairs=1, **kw):
    m = random_mdp(rng, n_states, n_actions, **kw)
    pairs = []
    for _ in range(n_pairs):
        b = {int(s) for s in rng.choice(n_states,
                                        size=int(rng.integers(0, 2)),
                                        replace=False)}
        g = {int(s) for s in rng.choice(n_states,
                                        size=int(rng.integers(1, 3)),
                                        replace=False)}
        pairs.append((b, g))
    return ProductMdp(m.state_names, m.action_names, m.initial, m.trans, pairs)


def random_communicating_product(rng, n_states, n_actions, n_pairs=1, **kw):
    from effsynth.graph import maec_decompose
    for _ in range(500):
        pm = random_product(rng, n_states, n_actions, n_pairs, **kw)
        if is_communicating(pm) and maec_decompose(pm):
            return pm
    raise RuntimeError("could not draw a communicating accepting instance")


def random_utilities(rng, m, reward_lo=-1.0, reward_hi=2.0,
                     cost_lo=0.25, cost_hi=2.0):
    r = {}
    c = {}
    for s, a in m.state_action_pairs():
        r[(s, a)] = float(rng.uniform(reward_lo, reward_hi))
        c[(s, a)] = float(rng.uniform(cost_lo, cost_hi))
    return UtilityFn(r, "reward"), UtilityFn(c, "cost")


def random_policy(rng, m):
    rule = {}
    for s in range(m.n_states):
        w = rng.dirichlet(np.ones(len(m.available[s])))
        rule[s] = {a: float(p) for a, p in zip(m.available[s], w)}
    return StationaryPolicy(rule)


def random_unichain_policy(rng, m, tries=200):
    for _ in range(tries):
        p = random_policy(rng, m)
        if analyze(induce_chain(m, p)).is_unichain():
            return p
    raise RuntimeError("could not draw a unichain policy")


def deterministic_policies(m):
    """Every deterministic stationary policy, as assignment dicts."""
    choices = [m.available[s] for s in range(m.n_states)]
    for combo in itertools.product(*choices):
        yield StationaryPolicy.deterministic(dict(enumerate(combo)))


def brute_force_best_ratio(m, r, c, start):
    """Max analytic efficiency over all deterministic stationary policies."""
    best = -np.inf
    for p in deterministic_policies(m):
        ca = analyze(induce_chain(m, p))
        best = max(best, efficiency(ca, m, r, c, p, start))
    return best


def brute_force_best_gain(m, u):
    """Per-state optimal average reward over deterministic policies."""
    best = np.full(m.n_states, -np.inf)
    for p in deterministic_policies(m):
        ca = analyze(induce_chain(m, p))
        for s in range(m.n_states):
            best[s] = max(best[s], average_utility(ca, m, u, p, s))
    return best


def enumerate_ecs(m):
    """Every end component, by enumerating all sub-MDPs (exponential)."""
    per_state = []
    for s in range(m.n_states):
        opts = [None]
        acts = m.available[s]
        for k in range(1, len(acts) + 1):
            opts.extend(itertools.combinations(acts, k))
        per_state.append(opts)
    ecs = []
    for combo in itertools.product(*per_state):
        chosen = {s: set(acts) for s, acts in enumerate(combo)
                  if acts is not None}
        if not chosen:
            continue
        state_set = set(chosen)
        closed = all(
            all(t in state_set for t, p in m.succ(s, a).items() if p > 0.0)
            for s, acts in chosen.items() for a in acts)
        if not closed:
            continue
        adj = {s: sorted({t for a in chosen[s]
                          for t, p in m.succ(s, a).items() if p > 0.0})
               for s in state_set}
        sccs = strongly_connected_components(state_set, adj)
        if len(sccs) == 1:
            ecs.append((frozenset(state_set),
                        {s: frozenset(a) for s, a in chosen.items()}))
    return ecs


def maximal_ecs(ecs):
    out = []
    for i, (s1, a1) in enumerate(ecs):
        dominated = False
        for j, (s2, a2) in enumerate(ecs):
            if i == j:
                continue
            if s1 <= s2 and all(a1[s] <= a2.get(s, frozenset()) for s in a1):
                if not (s2 <= s1 and all(a2[s] <= a1.get(s, frozenset())
                                         for s in a2)) or j < i:
                    dominated = True
                    break
        if not dominated:
            out.append((s1, a1))
    return out


def max_reach_probability(m, target):
    """Optimal reachability probabilities by deterministic-policy enumeration
    (exact: per-policy absorption solve), for small models only."""
    target = set(target)
    best = np.zeros(m.n_states)
    for p in deterministic_policies(m):
        chain = induce_chain(m, p)
        n = m.n_states
        # hitting probabilities: h = 1 on target, h = P h elsewhere, with
        # states that cannot reach the target pinned to zero
        reach = set(target)
        frontier = True
        while frontier:
            frontier = False
            for s in range(n):
                if s in reach:
                    continue
                if any(chain.P[s, t] > 0 for t in reach):
                    reach.add(s)
                    frontier = True
        rest = sorted(reach - target)
        h = np.zeros(n)
        for s in target:
            h[s] = 1.0
        if rest:
            a = np.eye(len(rest)) - chain.P[np.ix_(rest, rest)]
            b = np.array([sum(chain.P[s, t] * h[t]
                              for t in range(n) if t not in rest)
                          for s in rest])
            sol = np.linalg.solve(a, b)
            for i, s in enumerate(rest):
                h[s] = sol[i]
        best = np.maximum(best, h)
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
