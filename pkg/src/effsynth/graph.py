"""Qualitative structure of MDPs: end components, accepting decompositions,
almost-sure regions, and target-seeking action assignment.

All algorithms are deterministic: ties break on the lowest state index, then
the lowest action index.
"""

from dataclasses import dataclass

from .model import Mdp, ProductMdp, StationaryPolicy


class Unreachable(Exception):
    """The peeling loop stalled before every state was assigned."""


@dataclass(frozen=True)
class SubMdp:
    """A closed sub-MDP: state set plus a nonempty action restriction per state.

    Closure: every successor under a kept action stays inside state_set.
    """
    state_set: frozenset
    act: tuple  # tuple of (state, frozenset-of-actions), sorted by state

    @staticmethod
    def make(state_set, act_map):
        return SubMdp(frozenset(state_set),
                      tuple(sorted((s, frozenset(acts))
                                   for s, acts in act_map.items())))

    def act_map(self):
        return dict(self.act)

    def is_closed(self, m: Mdp):
        for s, acts in self.act:
            if not acts:
                return False
            for a in acts:
                if any(t not in self.state_set and p > 0.0
                       for t, p in m.succ(s, a).items()):
                    return False
        return True

    def contains(self, other):
        if not other.state_set <= self.state_set:
            return False
        mine = self.act_map()
        return all(acts <= mine.get(s, frozenset()) for s, acts in other.act)


@dataclass(frozen=True)
class EndComponent(SubMdp):
    """Sub-MDP whose induced digraph is strongly connected.

    scc_witness is a closed walk over state_set following induced edges and
    visiting every state, certifying strong connectivity.
    """
    scc_witness: tuple = ()

    @staticmethod
    def from_submdp(sub: SubMdp, m: Mdp):
        return EndComponent(sub.state_set, sub.act,
                            _closed_walk(m, sub.state_set, sub.act_map()))

    def witness_ok(self, m: Mdp):
        walk = self.scc_witness
        if len(self.state_set) == 1:
            s = next(iter(self.state_set))
            return all(any(s in m.succ(s, a) for a in acts)
                       for t, acts in self.act if t == s)
        if set(walk) != set(self.state_set) or walk[0] != walk[-1]:
            return False
        acts = self.act_map()
        for u, v in zip(walk, walk[1:]):
            if not any(v in m.succ(u, a) and m.succ(u, a)[v] > 0.0
                       for a in acts[u]):
                return False
        return True


def _successors(m, act_map):
    """Induced digraph adjacency restricted to an action map."""
    adj = {}
    for s, acts in act_map.items():
        nxt = set()
        for a in acts:
            for t, p in m.succ(s, a).items():
                if p > 0.0:
                    nxt.add(t)
        adj[s] = sorted(nxt)
    return adj


def strongly_connected_components(nodes, adj):
    """Tarjan's algorithm, iterative.  Returns a list of sorted node lists."""
    index = {}
    low = {}
    on_stack = set()
    stack = []
    sccs = []
    counter = [0]

    for root in sorted(nodes):
        if root in index:
            continue
        work = [(root, iter(adj.get(root, ())))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(adj.get(w, ()))))
                    advanced = True
                    break
                elif w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(sorted(comp))
    return sccs


def _closed_walk(m, state_set, act_map):
    """A closed walk visiting all states of a strongly connected sub-MDP."""
    states = sorted(state_set)
    if len(states) == 1:
        return (states[0],)
    adj = _successors(m, act_map)

    def path(u, v):
        prev = {u: None}
        queue = [u]
        qi = 0
        while qi < len(queue):
            x = queue[qi]
            qi += 1
            if x == v:
                break
            for y in adj[x]:
                if y not in prev:
                    prev[y] = x
                    queue.append(y)
        seq = [v]
        while seq[-1] != u:
            seq.append(prev[seq[-1]])
        return seq[::-1]

    root = states[0]
    walk = [root]
    for s in states[1:]:
        walk.extend(path(walk[-1], s)[1:])
    walk.extend(path(walk[-1], root)[1:])
    return tuple(walk)


def mec_decompose(m: Mdp, state_set=None, act_map=None):
    """All maximal end components, by iterative SCC refinement.

    Starting from the given restriction (default: the whole MDP), repeatedly
    drop state-action pairs whose successors leave the pair's SCC, and states
    left without actions, until stable.  The surviving SCCs are the MECs.
    """
    if state_set is None:
        state_set = set(range(m.n_states))
        act_map = {s: set(m.available[s]) for s in state_set}
    else:
        state_set = set(state_set)
        if act_map is None:
            act_map = {s: {a for a in m.available[s]
                           if all(t in state_set
                                  for t, p in m.succ(s, a).items() if p > 0.0)}
                       for s in state_set}
        else:
            act_map = {s: set(acts) for s, acts in act_map.items()}
        for s in [s for s in state_set if not act_map.get(s)]:
            state_set.discard(s)
            act_map.pop(s, None)

    while True:
        if not state_set:
            return []
        sccs = strongly_connected_components(state_set, _successors(m, act_map))
        comp_of = {}
        for i, comp in enumerate(sccs):
            for s in comp:
                comp_of[s] = i
        changed = False
        for s in sorted(state_set):
            keep = set()
            for a in act_map[s]:
                ok = all(t in state_set and comp_of[t] == comp_of[s]
                         for t, p in m.succ(s, a).items() if p > 0.0)
                if ok:
                    keep.add(a)
                else:
                    changed = True
            if keep:
                act_map[s] = keep
            else:
                state_set.discard(s)
                del act_map[s]
                changed = True
        if not changed:
            break

    mecs = []
    for comp in sccs:
        sub = SubMdp.make(comp, {s: act_map[s] for s in comp})
        mecs.append(EndComponent.from_submdp(sub, m))
    mecs.sort(key=lambda ec: min(ec.state_set))
    return mecs


def maec_decompose(pm: ProductMdp):
    """All maximal accepting end components.

    Per Rabin pair (B, G): decompose the MDP restricted to states outside B
    into MECs and keep those meeting G; then discard candidates contained in
    another candidate (states and actions).
    """
    candidates = []
    for b, g in pm.acc_pairs:
        keep = set(range(pm.n_states)) - set(b)
        for ec in mec_decompose(pm, state_set=keep):
            if ec.state_set & g:
                candidates.append(ec)
    out = []
    for i, c in enumerate(candidates):
        dominated = any(
            (j != i and candidates[j].contains(c) and
             (not c.contains(candidates[j]) or j < i))
            for j in range(len(candidates)))
        if not dominated:
            out.append(c)
    out.sort(key=lambda ec: min(ec.state_set))
    return out


def amec_filter(pm: ProductMdp):
    """The MECs of pm containing at least one MAEC, with full MEC action sets."""
    maecs = maec_decompose(pm)
    out = []
    for mec in mec_decompose(pm):
        if any(mec.contains(ma) for ma in maecs):
            out.append(mec)
    return out


def almost_sure_region(pm: ProductMdp):
    """Product states from which some policy reaches the AMEC union w.p.1.

    Classic double fixpoint: shrink the candidate set U until every state in U
    can reach the target through actions whose successors never leave U.
    """
    target = set()
    for amec in amec_filter(pm):
        target |= amec.state_set
    u = set(range(pm.n_states))
    while True:
        r = target & u
        frontier = True
        while frontier:
            frontier = False
            for s in sorted(u - r):
                for a in pm.available[s]:
                    succ = [t for t, p in pm.succ(s, a).items() if p > 0.0]
                    if all(t in u for t in succ) and any(t in r for t in succ):
                        r.add(s)
                        frontier = True
                        break
        if r == u:
            return u
        u = r


def attractor_policy(m: Mdp, target, p: StationaryPolicy) -> StationaryPolicy:
    """Extend p from target to all states so target is reached w.p.1.

    Peeling loop: repeatedly pick the lowest (state, action) with positive
    one-step probability into the grown region and fix that action.
    """
    grown = set(target)
    todo = set(range(m.n_states)) - grown
    extra = {}
    while todo:
        found = None
        for s in sorted(todo):
            for a in m.available[s]:
                if any(t in grown and prob > 0.0
                       for t, prob in m.succ(s, a).items()):
                    found = (s, a)
                    break
            if found:
                break
        if found is None:
            raise Unreachable(f"states {sorted(todo)} cannot reach the target")
        s, a = found
        extra[s] = {a: 1.0}
        todo.discard(s)
        grown.add(s)
    return p.extended(extra)


def restrict(m: Mdp, sub: SubMdp, initial=None):
    """Extract a sub-MDP as a standalone model.

    Returns (model, global_ids) where global_ids[i] is the original index of
    local state i.  Acceptance pairs of products are intersected and re-keyed.
    The local initial state maps the given global one, defaulting to the
    lowest index in the subset (fine for callers that never depend on it).
    """
    ids = sorted(sub.state_set)
    local = {g: i for i, g in enumerate(ids)}
    acts = sub.act_map()
    trans = {}
    for g in ids:
        for a in sorted(acts[g]):
            trans[(local[g], a)] = {local[t]: p for t, p in m.succ(g, a).items()}
    names = [m.state_names[g] for g in ids]
    labels = [m.labels[g] for g in ids]
    init = local[initial] if initial is not None else 0
    if isinstance(m, ProductMdp):
        acc = [(frozenset(local[s] for s in b if s in local),
                frozenset(local[s] for s in g if s in local))
               for b, g in m.acc_pairs]
        comps = ([m.components[g] for g in ids]
                 if m.components is not None else None)
        sub_m = ProductMdp(names, m.action_names, init, trans, acc,
                           m.atomic_props, labels, components=comps)
    else:
        sub_m = Mdp(names, m.action_names, init, trans, m.atomic_props,
                    labels)
    return sub_m, ids


def is_communicating(m: Mdp):
    """Every state can reach every other under some policy: the full induced
    digraph is one strongly connected component."""
    adj = {s: ts for s, ts in enumerate(m.edges())}
    return len(strongly_connected_components(range(m.n_states), adj)) == 1
