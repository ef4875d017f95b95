"""Grid-world benchmark generators.

Case 1 is a 9x9 delivery workspace: a robot roams the grid, picks up items
that appear probabilistically, and delivers them to one of two destination
corners while avoiding obstacle cells; a charging variant additionally forces
recurring visits to a charging cell.  Case 2 is a 7x7 factory of three nested
one-way rings with hop cells between them; a command cell grants permission
and a material cell pays a pickup bonus whenever permission is held.

Both figures in the source material carry per-cell numeric fields that were
published only as pictures, so the generators take the fields as parameters
and ship documented defaults that reproduce the qualitative structure (item
probability grows with distance from the paying destination; the middle ring
is the efficient-but-nonaccepting loop).
"""

from dataclasses import dataclass, field

from .model import Dra, Mdp, UtilityFn


class ParamError(Exception):
    pass


# cost of moving, keyed by Manhattan distance to the nearest destination
COST_BY_DISTANCE = {0: 3.2, 1: 3.0, 2: 2.7, 3: 2.5, 4: 1.5,
                    5: 1.0, 6: 1.0, 7: 1.0, 8: 1.0}

CASE1_OBSTACLES = frozenset({(2, 2), (2, 3), (3, 2), (3, 3),
                             (7, 3), (7, 4), (8, 3), (8, 4),
                             (4, 7), (4, 8), (5, 7), (5, 8)})

MOVES = {"left": (0, -1), "right": (0, 1), "up": (-1, 0), "down": (1, 0)}


def _default_item_field(size, dests):
    """Item probability grows with the distance to the nearest destination
    (cells right next to a delivery point rarely hold items), with a small
    eastward tilt so the efficient excursion runs along the bottom row rather
    than its mirror image up the west column."""
    out = {}
    for row in range(1, size + 1):
        for col in range(1, size + 1):
            d = min(abs(row - dr) + abs(col - dc) for dr, dc in dests)
            out[(row, col)] = min(0.02 + 0.10 * d + 0.01 * (col - 1), 0.9)
    return out


@dataclass
class Case1Params:
    size: int = 9
    obstacles: frozenset = CASE1_OBSTACLES
    initial: tuple = (1, 1)
    destinations: dict = field(default_factory=lambda: {(9, 1): 2.0, (1, 9): 1.0})
    charging: tuple = (8, 1)
    item_prob: dict | None = None  # cell -> probability; None = default field
    cost_table: dict = field(default_factory=lambda: dict(COST_BY_DISTANCE))

    def resolved_field(self):
        field_ = self.item_prob or _default_item_field(self.size,
                                                       set(self.destinations))
        for cell, p in field_.items():
            if not 0.0 <= p <= 1.0:
                raise ParamError(f"item probability {p} at {cell} out of [0,1]")
        return field_

    def validate(self):
        for d, v in self.cost_table.items():
            if v <= 0.0:
                raise ParamError(f"cost table entry {d} -> {v} not positive")
        for cell in self.destinations:
            if cell in self.obstacles:
                raise ParamError(f"destination {cell} is an obstacle")
        if self.initial in self.obstacles or self.charging in self.obstacles:
            raise ParamError("initial/charging cell is an obstacle")


def _free_cells(params):
    return [(r, c) for r in range(1, params.size + 1)
            for c in range(1, params.size + 1)
            if (r, c) not in params.obstacles]


def gen_case1(params: Case1Params | None = None):
    """Returns (mdp, dra_phi1, dra_phi2, reward, cost).

    State space: (cell, carry) over the obstacle-free grid.  An action exists
    when the move stays on the board and off obstacles (obstacle avoidance is
    structural; the automata still track the obstacle proposition).  Finding
    an item is resolved at the *successor* cell, and a delivery frees the robot
    to pick up again in the same step.
    """
    params = params or Case1Params()
    params.validate()
    prob = params.resolved_field()
    cells = _free_cells(params)
    if params.initial not in cells:
        raise ParamError("initial cell not on the board")

    states = [(cell, carry) for cell in cells for carry in (0, 1)]
    sidx = {st: i for i, st in enumerate(states)}
    names = [f"r{cell[0]}c{cell[1]}_{carry}" for cell, carry in states]
    actions = list(MOVES)
    aidx = {a: i for i, a in enumerate(actions)}

    dest_cells = set(params.destinations)

    def moves_from(cell):
        for a, (dr, dc) in MOVES.items():
            tgt = (cell[0] + dr, cell[1] + dc)
            if 1 <= tgt[0] <= params.size and 1 <= tgt[1] <= params.size \
                    and tgt not in params.obstacles:
                yield a, tgt

    trans = {}
    for (cell, carry) in states:
        at_dest = carry == 1 and cell in dest_cells
        for a, tgt in moves_from(cell):
            p_found = prob[tgt]
            if carry == 0 or at_dest:
                dist = {}
                if p_found > 0.0:
                    dist[sidx[(tgt, 1)]] = p_found
                if p_found < 1.0:
                    dist[sidx[(tgt, 0)]] = 1.0 - p_found
            else:
                dist = {sidx[(tgt, 1)]: 1.0}
            trans[(sidx[(cell, carry)], aidx[a])] = dist

    labels = []
    for (cell, carry) in states:
        lab = set()
        if carry == 1 and cell in dest_cells:
            lab.add("d")
        if cell == params.charging:
            lab.add("c")
        labels.append(frozenset(lab))
    m = Mdp(names, actions, sidx[(params.initial, 0)], trans,
            ("d", "b", "c"), labels)

    def nearest_dest(cell):
        return min(abs(cell[0] - d[0]) + abs(cell[1] - d[1])
                   for d in dest_cells)

    reward_vals = {}
    cost_vals = {}
    for (cell, carry) in states:
        si = sidx[(cell, carry)]
        dist = nearest_dest(cell)
        if dist not in params.cost_table:
            raise ParamError(f"cost table lacks distance {dist}")
        for a in m.available[si]:
            cost_vals[(si, a)] = params.cost_table[dist]
            if carry == 1 and cell in dest_cells:
                reward_vals[(si, a)] = params.destinations[cell]
            else:
                reward_vals[(si, a)] = 0.0
    reward = UtilityFn(reward_vals, "reward")
    cost = UtilityFn(cost_vals, "cost")
    return m, dra_recurrence_avoid(), dra_recurrence_avoid_charge(), reward, cost


def dra_recurrence_avoid() -> Dra:
    """3-state automaton: visit d-states infinitely often, never touch b.

    q0 waits for d, q1 flags a d-visit, q2 is the absorbing failure state.
    """
    ap = ("d", "b", "c")
    delta = {}
    for q in (0, 1):
        for sym in _symbols(ap):
            if "b" in sym:
                delta[(q, sym)] = 2
            elif "d" in sym:
                delta[(q, sym)] = 1
            else:
                delta[(q, sym)] = 0
    for sym in _symbols(ap):
        delta[(2, sym)] = 2
    return Dra(3, 0, ap, delta, [({2}, {1})])


def dra_recurrence_avoid_charge() -> Dra:
    """5-state automaton: d and c each infinitely often, never b.

    Round-robin obligation: q0/q1 wait for d, q2 waits for c, q3 flags a
    completed d-then-c round, q4 is the absorbing failure state.
    """
    ap = ("d", "b", "c")
    delta = {}
    for q in (0, 1, 3):
        for sym in _symbols(ap):
            if "b" in sym:
                delta[(q, sym)] = 4
            elif "d" in sym:
                delta[(q, sym)] = 2
            else:
                delta[(q, sym)] = 1
    for sym in _symbols(ap):
        if "b" in sym:
            delta[(2, sym)] = 4
        elif "c" in sym:
            delta[(2, sym)] = 3
        else:
            delta[(2, sym)] = 2
        delta[(4, sym)] = 4
    return Dra(5, 0, ap, delta, [({4}, {3})])


def _symbols(ap):
    out = []
    for bits in range(2 ** len(ap)):
        out.append(frozenset(p for i, p in enumerate(ap) if bits & (1 << i)))
    return out


# --- case 2: nested-ring factory ------------------------------------------

def _ring(top, left, bottom, right):
    """Clockwise ring path (up the left side from mid-left, across the top,
    down the right, back along the bottom), as cell -> successor."""
    cells = []
    for r in range(bottom, top - 1, -1):
        cells.append((r, left))
    for c in range(left + 1, right + 1):
        cells.append((top, c))
    for r in range(top + 1, bottom + 1):
        cells.append((r, right))
    for c in range(right - 1, left, -1):
        cells.append((bottom, c))
    return {cells[i]: cells[(i + 1) % len(cells)] for i in range(len(cells))}


@dataclass
class Case2Params:
    size: int = 7
    command: tuple = (3, 4)    # label g, on the inner ring
    material: tuple = (7, 7)   # label r, on the outer ring
    initial: tuple = (4, 1)
    ring_reward: dict = field(default_factory=lambda: {
        "outer": 0.25, "middle": 1.1, "inner": 0.25})
    cell_cost: float = 1.0

    def validate(self):
        if self.cell_cost <= 0.0:
            raise ParamError("cell cost must be positive")


def gen_case2(params: Case2Params | None = None):
    """Returns (mdp, dra, reward_family, cost).

    Three concentric one-way rings with bidirectional hop actions between
    them on the middle row; a permission bit is set at the command cell and
    consumed at the material cell.  reward_family(bonus) builds the reward
    that adds `bonus` on permission-holding arrivals at the material cell.
    """
    params = params or Case2Params()
    params.validate()
    n = params.size
    rings = {"outer": _ring(1, 1, n, n),
             "middle": _ring(2, 2, n - 1, n - 1),
             "inner": _ring(3, 3, n - 2, n - 2)}
    ring_of = {}
    follow = {}
    for name, ring in rings.items():
        for cell, nxt in ring.items():
            ring_of[cell] = name
            follow[cell] = nxt
    mid = (n + 1) // 2
    hops = {((mid, 1), "in"): (mid, 2), ((mid, 2), "out"): (mid, 1),
            ((mid, 2), "in"): (mid, 3), ((mid, 3), "out"): (mid, 2)}
    for cell in (params.command, params.material, params.initial):
        if cell not in ring_of:
            raise ParamError(f"cell {cell} is not on a ring")

    def perm_after(perm, tgt):
        if tgt == params.command:
            return 1
        if tgt == params.material and perm == 1:
            return 0
        return perm

    # some (cell, perm) pairs can never be entered (arriving at the command
    # cell forces the permission bit); keep the reachable part so the model
    # is communicating
    cells = sorted(ring_of)
    reach = {(params.initial, 0)}
    frontier = [(params.initial, 0)]
    while frontier:
        cell, perm = frontier.pop()
        outs = [follow[cell]] + [tgt for (hc, _), tgt in hops.items()
                                 if hc == cell]
        for tgt in outs:
            nxt = (tgt, perm_after(perm, tgt))
            if nxt not in reach:
                reach.add(nxt)
                frontier.append(nxt)
    states = [(cell, perm) for cell in cells for perm in (0, 1)
              if (cell, perm) in reach]
    sidx = {st: i for i, st in enumerate(states)}
    names = [f"r{c[0]}c{c[1]}_{perm}" for c, perm in states]
    actions = ["go", "in", "out"]
    aidx = {a: i for i, a in enumerate(actions)}

    trans = {}
    targets = {}
    for (cell, perm) in states:
        si = sidx[(cell, perm)]
        outs = {"go": follow[cell]}
        for (hc, act), tgt in hops.items():
            if hc == cell:
                outs[act] = tgt
        for act, tgt in outs.items():
            trans[(si, aidx[act])] = {sidx[(tgt, perm_after(perm, tgt))]: 1.0}
            targets[(si, aidx[act])] = tgt
    labels = []
    for (cell, perm) in states:
        lab = set()
        if cell == params.command:
            lab.add("g")
        if cell == params.material:
            lab.add("r")
        labels.append(frozenset(lab))
    m = Mdp(names, actions, sidx[(params.initial, 0)], trans,
            ("g", "r"), labels)

    cost = UtilityFn({(s, a): params.cell_cost for (s, a) in targets},
                     "cost")

    def reward_family(bonus):
        vals = {}
        for ((si, ai), tgt) in targets.items():
            base = params.ring_reward[ring_of[tgt]]
            if tgt in (params.command, params.material):
                base = 0.0
            cell, perm = states[si]
            if tgt == params.material and perm == 1:
                base += bonus
            vals[(si, ai)] = base
        return UtilityFn(vals, "reward")

    return m, dra_command_then_material(), reward_family, cost


def dra_command_then_material() -> Dra:
    """3-state automaton for: infinitely often, a command visit followed by a
    material visit (round-robin over g then r)."""
    ap = ("g", "r")
    delta = {}
    for sym in _symbols(ap):
        delta[(0, sym)] = 1 if "g" in sym else 0
        delta[(1, sym)] = 2 if "r" in sym else 1
        delta[(2, sym)] = 1 if "g" in sym else 0
    return Dra(3, 0, ap, delta, [(set(), {2})])
