"""Linear and linear-fractional programs on dense tableaus.

The solver is a two-phase primal simplex in standard equality form
(max c.x, A x = b, x >= 0).  Pricing is Dantzig's with Bland's smallest-index
rule taking over on degenerate stalls, which rules out cycling; ratio-test
ties go to the largest pivot element, and the tableau is recomputed from the
basis periodically so pivot roundoff cannot compound.  On top of it sit the
two programs the synthesis needs: the reward-to-cost ratio program over
occupation measures, reduced to an LP by the Charnes-Cooper substitution, and
the multichain average-reward LP with its x/y policy decoding.
"""

from dataclasses import dataclass

import numpy as np

from .model import Mdp, StationaryPolicy, UtilityFn
from .graph import attractor_policy, is_communicating

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-9
SUPPORT_THRESHOLD = 1e-9  # occupation mass below this is treated as zero


class NumericalFailure(Exception):
    """Pivot breakdown or residual beyond tolerance."""


class InfeasibleError(Exception):
    """The program has no feasible point (malformed model upstream)."""


class NotCommunicating(Exception):
    """The ratio program requires a communicating model."""


class DegenerateDecoding(Exception):
    """Both x and y rows vanish at some state (solver tolerance issue)."""


@dataclass(frozen=True)
class LpProblem:
    """max c.x  s.t.  a_eq x = b_eq, x >= 0."""
    c: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray


@dataclass(frozen=True)
class LpResult:
    status: str  # 'optimal' | 'infeasible' | 'unbounded'
    x: np.ndarray | None = None
    value: float | None = None


REFRESH_INTERVAL = 64   # reinversion cadence, purges accumulated pivot error
STALL_LIMIT = 256       # degenerate pivots tolerated before Bland's rule


class _Tableau:
    """Dense simplex tableau with periodic reinversion.

    The basis list is the source of truth: refresh() recomputes the tableau
    as B^-1 [A | b] from the original data, so roundoff from long runs of
    rank-one pivot updates never compounds past REFRESH_INTERVAL pivots.
    """

    def __init__(self, a, b, cost):
        self.a = a
        self.b = b
        self.cost = cost
        self.m, self.n_total = a.shape
        self.basis = None
        self.tab = None
        self.obj = None

    def set_basis(self, basis):
        self.basis = list(basis)
        self.in_basis = np.zeros(self.n_total, dtype=bool)
        self.in_basis[self.basis] = True
        self.refresh()

    def refresh(self):
        bmat = self.a[:, self.basis]
        try:
            sol = np.linalg.solve(bmat, np.hstack([self.a,
                                                   self.b.reshape(-1, 1)]))
        except np.linalg.LinAlgError as e:
            raise NumericalFailure(f"singular basis on reinversion: {e}") from e
        self.tab = sol
        rhs = self.tab[:, -1]
        if np.any(rhs < -1e-7):
            raise NumericalFailure(
                f"lost primal feasibility (min rhs {rhs.min():g})")
        np.clip(rhs, 0.0, None, out=rhs)
        cb = self.cost[self.basis]
        self.obj = cb @ self.tab
        self.obj[:-1] -= self.cost

    def pivot(self, row, col):
        piv = self.tab[row, col]
        if abs(piv) < 1e-11:
            raise NumericalFailure(f"pivot element {piv:g} too small")
        self.tab[row, :] /= piv
        colv = self.tab[:, col].copy()
        colv[row] = 0.0
        self.tab -= np.outer(colv, self.tab[row, :])
        self.obj -= self.obj[col] * self.tab[row, :]
        self.in_basis[self.basis[row]] = False
        self.in_basis[col] = True
        self.basis[row] = col

    def value(self):
        return float(self.obj[-1])


def _iterate(t: _Tableau, n_cols, max_iter, safe=False):
    """Run simplex to optimality on the first n_cols columns.

    Pricing is Dantzig's (most negative reduced cost) with a Harris-style
    ratio test that prefers the largest pivot element among minimum-ratio
    rows.  A long degenerate stall switches to Bland's smallest-index rule,
    whose pivots cannot cycle, until the objective moves again.  Safe mode
    reinverts after every pivot; the fast mode reinverts periodically and
    whenever a pivot would land on a suspiciously small element of a stale
    tableau (the true value might be zero, which would corrupt the basis).
    """
    stall = 0
    bland = False
    since_refresh = 0
    last = t.value()
    for _ in range(max_iter):
        reduced = t.obj[:n_cols]
        # basic columns are excluded: drift can give them a spuriously
        # negative reduced cost, and re-entering one corrupts the basis
        entering = np.nonzero((reduced < -PIVOT_TOL)
                              & ~t.in_basis[:n_cols])[0]
        if entering.size == 0:
            return "optimal"
        if bland:
            enter = int(entering[0])
        else:
            enter = int(entering[np.argmin(reduced[entering])])
        col = t.tab[:, enter]
        mask = col > PIVOT_TOL
        if not mask.any():
            return "unbounded"
        rhs = t.tab[:, -1]
        ratios = np.where(mask, rhs / np.where(mask, col, 1.0), np.inf)
        best = float(ratios.min())
        window = 1e-9 * max(1.0, abs(best))
        tied = np.nonzero(ratios <= best + window)[0]
        if bland:
            leave = int(min(tied, key=lambda i: t.basis[i]))
        else:
            leave = int(max(tied, key=lambda i: (col[i], -t.basis[i])))
        if since_refresh and abs(t.tab[leave, enter]) < 1e-6:
            t.refresh()
            since_refresh = 0
            continue  # re-derive the choice from exact data
        t.pivot(leave, enter)
        since_refresh += 1
        if safe or since_refresh >= REFRESH_INTERVAL \
                or np.any(t.tab[:, -1] < -1e-9):
            t.refresh()
            since_refresh = 0
        now = t.value()
        if now > last + 1e-12:
            stall = 0
            bland = False
            last = now
        else:
            stall += 1
            if stall >= STALL_LIMIT:
                bland = True
    raise NumericalFailure("simplex iteration limit exceeded")


def solve_lp(p: LpProblem) -> LpResult:
    """Two-phase dense primal simplex.

    Dantzig pricing with Bland's smallest-index rule engaged on degenerate
    stalls (anti-cycling), Harris-style largest-pivot ratio ties, and
    reinversion every few dozen pivots for numerical hygiene.  A numerical
    failure triggers one retry with reinversion after every pivot.
    """
    try:
        return _solve_lp(p, safe=False)
    except NumericalFailure:
        return _solve_lp(p, safe=True)


def _solve_lp(p: LpProblem, safe: bool) -> LpResult:
    a = np.asarray(p.a_eq, dtype=float)
    b = np.asarray(p.b_eq, dtype=float).copy()
    c = np.asarray(p.c, dtype=float)
    if a.ndim != 2 or a.shape[0] != b.size or a.shape[1] != c.size:
        raise ValueError("inconsistent LP dimensions")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))
            and np.all(np.isfinite(c))):
        raise ValueError("LP data must be finite")
    m, n = a.shape
    a = a.copy()
    neg = b < 0
    a[neg, :] *= -1.0
    b[neg] *= -1.0
    max_iter = 20000 + 200 * (m + n)

    # phase 1: artificial basis, maximize -sum(artificials)
    full = np.hstack([a, np.eye(m)])
    c1 = np.zeros(n + m)
    c1[n:] = -1.0
    t = _Tableau(full, b, c1)
    t.set_basis(range(n, n + m))
    status = _iterate(t, n + m, max_iter, safe)
    art_sum = -t.value()
    if status != "optimal" or art_sum > 1e-7:
        return LpResult(status="infeasible")

    # drive leftover artificials out of the basis, dropping redundant rows;
    # reinvert first so the pivots run on exact data, and pivot on the
    # largest structural entry (a tiny pivot with a nonzero basic artificial
    # would inject a macroscopic infeasibility)
    t.refresh()
    keep = []
    for i in range(m):
        if t.basis[i] < n:
            keep.append(i)
            continue
        row = t.tab[i, :n]
        j = int(np.argmax(np.abs(row)))
        if abs(row[j]) > 1e-7:
            t.pivot(i, j)
            keep.append(i)
    if len(keep) < m:
        a = a[keep, :]
        b = b[keep]
        m = len(keep)
        basis = [t.basis[i] for i in keep]
    else:
        basis = list(t.basis)

    # phase 2 on the original objective over the structural columns
    t = _Tableau(a, b, c)
    t.set_basis(basis)
    status = _iterate(t, n, max_iter, safe)
    if status == "unbounded":
        return LpResult(status="unbounded")

    # recover the basic solution by a direct solve with one round of
    # iterative refinement, which brings the residual to working precision
    x = np.zeros(n)
    if m:
        bmat = a[:, t.basis]
        xb = np.linalg.solve(bmat, b)
        xb += np.linalg.solve(bmat, b - bmat @ xb)
        for i, bi in enumerate(t.basis):
            x[bi] = xb[i]
    if np.any(x < -FEAS_TOL):
        raise NumericalFailure(f"negative basic value {x.min():g}")
    x[np.abs(x) < 1e-14] = 0.0
    np.clip(x, 0.0, None, out=x)
    scale = max(1.0, float(np.max(np.abs(p.b_eq))) if p.b_eq.size else 1.0)
    resid = (float(np.max(np.abs(p.a_eq @ x - p.b_eq)))
             if p.b_eq.size else 0.0)
    if resid > FEAS_TOL * scale:
        raise NumericalFailure(f"solution residual {resid:g} beyond tolerance")
    return LpResult(status="optimal", x=x, value=float(c @ x))


@dataclass(frozen=True)
class LfpSolution:
    """Occupation weights gamma(s, a) (summing to one) and the optimal ratio."""
    gamma: dict
    value: float


def solve_ratio_lfp(m: Mdp, r: UtilityFn, c: UtilityFn) -> LfpSolution:
    """Maximum reward-to-cost ratio over stationary occupation measures.

    The fractional objective over flow-balanced weights is rescaled by the
    Charnes-Cooper substitution (denominator pinned to one, the normalization
    turned into a free scale), solved as an LP, and scaled back so the weights
    sum to one.  The value equals the optimal ratio from every state of the
    communicating model.
    """
    if not is_communicating(m):
        raise NotCommunicating("ratio program needs a communicating model")
    r.check_complete(m)
    c.check_complete(m)
    pairs = list(m.state_action_pairs())
    col = {sa: j for j, sa in enumerate(pairs)}
    n = len(pairs)

    a_eq = np.zeros((m.n_states + 1, n))
    b_eq = np.zeros(m.n_states + 1)
    for (s, a), j in col.items():
        a_eq[s, j] += 1.0
        for t, prob in m.succ(s, a).items():
            a_eq[t, j] -= prob
    for (s, a), j in col.items():
        a_eq[m.n_states, j] = c(s, a)
    b_eq[m.n_states] = 1.0
    cobj = np.array([r(s, a) for s, a in pairs])

    res = solve_lp(LpProblem(c=cobj, a_eq=a_eq, b_eq=b_eq))
    if res.status == "infeasible":
        raise InfeasibleError("ratio program infeasible: malformed model")
    if res.status == "unbounded":
        raise NumericalFailure("ratio program unbounded: cost not positive?")
    y = res.x
    total = float(y.sum())
    if total <= 0.0:
        raise NumericalFailure("ratio program returned zero occupation mass")
    gamma = {sa: float(y[j]) / total for sa, j in col.items()}
    return LfpSolution(gamma=gamma, value=float(res.value))


def decode_ratio_policy(m: Mdp, sol: LfpSolution) -> StationaryPolicy:
    """Policy carried by the occupation weights.

    Inside the support Q the rule is the normalized weights; outside, actions
    are assigned so Q is reached w.p.1.  If the support splits into several
    recurrent classes (they tie in ratio at an optimum), everything is steered
    into the class with the lowest state index so the result is unichain.
    """
    mass = {}
    for (s, a), g in sol.gamma.items():
        mass[s] = mass.get(s, 0.0) + g
    q_set = {s for s, tot in mass.items() if tot > SUPPORT_THRESHOLD}
    rule = {}
    for s in q_set:
        dist = {a: sol.gamma[(s, a)] / mass[s] for a in m.available[s]
                if sol.gamma.get((s, a), 0.0) > SUPPORT_THRESHOLD}
        total = sum(dist.values())
        rule[s] = {a: p / total for a, p in dist.items()}
    policy = attractor_policy(m, q_set, StationaryPolicy(rule))

    from .chain import analyze  # local import: chain depends on graph only
    from .model import induce_chain
    ca = analyze(induce_chain(m, policy))
    if len(ca.recurrent_classes) > 1:
        chosen = min(ca.recurrent_classes, key=lambda comp: comp[0])
        kept = {s: policy.rule[s] for s in chosen}
        policy = attractor_policy(m, set(chosen), StationaryPolicy(kept))
    return policy


@dataclass(frozen=True)
class AvgLpSolution:
    """Occupation x, deviation y, and the alpha-weighted optimal gain."""
    x: dict
    y: dict
    gain: float


def solve_avg_reward_lp(m: Mdp, reward: UtilityFn) -> AvgLpSolution:
    """Multichain average-reward LP with uniform initial weights.

    Variables x(s,a) (stationary occupation) and y(s,a) (deviation flow);
    constraints balance the stationary flow and route alpha mass into the
    occupation support.  The objective is the alpha-weighted optimal gain.
    """
    reward.check_complete(m)
    pairs = list(m.state_action_pairs())
    k = len(pairs)
    col_x = {sa: j for j, sa in enumerate(pairs)}
    col_y = {sa: k + j for j, sa in enumerate(pairs)}
    ns = m.n_states
    alpha = np.full(ns, 1.0 / ns)

    a_eq = np.zeros((2 * ns, 2 * k))
    b_eq = np.zeros(2 * ns)
    for (s, a), j in col_x.items():
        a_eq[s, j] += 1.0
        for t, prob in m.succ(s, a).items():
            a_eq[t, j] -= prob
    for (s, a), j in col_x.items():
        a_eq[ns + s, j] += 1.0
    for (s, a), j in col_y.items():
        a_eq[ns + s, j] += 1.0
        for t, prob in m.succ(s, a).items():
            a_eq[ns + t, j] -= prob
    b_eq[ns:] = alpha
    cobj = np.zeros(2 * k)
    for (s, a), j in col_x.items():
        cobj[j] = reward(s, a)

    res = solve_lp(LpProblem(c=cobj, a_eq=a_eq, b_eq=b_eq))
    if res.status == "infeasible":
        raise InfeasibleError("average-reward program infeasible")
    if res.status == "unbounded":
        raise NumericalFailure("average-reward program unbounded")
    x = {sa: float(res.x[j]) for sa, j in col_x.items()}
    y = {sa: float(res.x[j]) for sa, j in col_y.items()}
    return AvgLpSolution(x=x, y=y, gain=float(res.value))


def decode_avg_policy(m: Mdp, sol: AvgLpSolution) -> StationaryPolicy:
    """x-proportional on the occupation support, y-proportional elsewhere."""
    rule = {}
    for s in range(m.n_states):
        x_row = {a: sol.x.get((s, a), 0.0) for a in m.available[s]}
        y_row = {a: sol.y.get((s, a), 0.0) for a in m.available[s]}
        if sum(x_row.values()) > SUPPORT_THRESHOLD:
            row = x_row
        elif sum(y_row.values()) > SUPPORT_THRESHOLD:
            row = y_row
        else:
            raise DegenerateDecoding(
                f"state {m.state_names[s]}: x and y both vanish")
        kept = {a: v for a, v in row.items() if v > SUPPORT_THRESHOLD}
        if not kept:
            best = max(row, key=row.get)
            kept = {best: row[best]}
        total = sum(kept.values())
        rule[s] = {a: v / total for a, v in kept.items()}
    return StationaryPolicy(rule)
