"""Exact analysis of finite Markov chains.

Everything here is dense linear algebra: recurrent classes are the bottom
strongly connected components of the support graph, stationary distributions
and absorption probabilities come from LU solves, and the limit matrix is
assembled row by row.  On top of that sit the long-run average utility, the
reward-to-cost efficiency for general multichain chains, potential vectors
g = (I - P + P*)^{-1} v, deviation vectors, and the perturbation identity
relating the efficiencies of a policy and its mixture with another policy.
"""

from dataclasses import dataclass

import numpy as np

from .model import Mc, Mdp, StationaryPolicy, UtilityFn, induce_chain
from .graph import strongly_connected_components

SUPPORT_EPS = 1e-12   # edge threshold guarding float dust from policy mixtures
LIMIT_TOL = 1e-9      # limit-matrix algebra tolerance
POTENTIAL_TOL = 1e-8  # residual tolerance for potential solves


class SingularSystem(Exception):
    """A linear solve failed beyond tolerance."""


class NotUnichain(Exception):
    """An operation required a single recurrent class."""


@dataclass(frozen=True)
class ChainAnalysis:
    """Recurrent structure of a chain together with its limit matrix.

    absorb[s, k] is the probability of ending up (and staying forever) in
    recurrent class k when starting from s; the column of a transient state in
    limit_matrix is identically zero.
    """
    chain: Mc
    recurrent_classes: tuple
    transient: frozenset
    stationary: tuple       # per-class stationary distribution over class states
    absorb: np.ndarray      # n_states x n_classes
    limit_matrix: np.ndarray

    def absorb_prob(self, s, k):
        return float(self.absorb[s, k])

    def is_unichain(self):
        return len(self.recurrent_classes) == 1


def analyze(chain: Mc) -> ChainAnalysis:
    """Classify states, solve for stationary and absorption structure, and
    assemble the limit matrix P* (Cesaro limit of the powers of P)."""
    P = chain.P
    n = chain.n_states
    if np.max(np.abs(P.sum(axis=1) - 1.0)) > 1e-9:
        raise ValueError("chain is not row-stochastic")
    adj = {s: [t for t in range(n) if P[s, t] > SUPPORT_EPS] for s in range(n)}
    sccs = strongly_connected_components(range(n), adj)
    comp_of = {}
    for i, comp in enumerate(sccs):
        for s in comp:
            comp_of[s] = i
    bottom = []
    for comp in sccs:
        if all(comp_of[t] == comp_of[comp[0]] for s in comp for t in adj[s]):
            bottom.append(tuple(comp))
    bottom.sort(key=lambda c: c[0])
    classes = tuple(bottom)
    rec_states = {s for comp in classes for s in comp}
    transient = frozenset(range(n)) - rec_states

    stationary = []
    for comp in classes:
        k = len(comp)
        sub = P[np.ix_(comp, comp)]
        a = sub.T - np.eye(k)
        a[-1, :] = 1.0
        b = np.zeros(k)
        b[-1] = 1.0
        try:
            pi = np.linalg.solve(a, b)
        except np.linalg.LinAlgError as e:
            raise SingularSystem(f"stationary solve failed: {e}") from e
        if np.any(pi < -LIMIT_TOL) or abs(pi.sum() - 1.0) > 1e-7:
            raise SingularSystem("stationary distribution out of tolerance")
        stationary.append(np.maximum(pi, 0.0))

    absorb = np.zeros((n, len(classes)))
    for k, comp in enumerate(classes):
        for s in comp:
            absorb[s, k] = 1.0
    if transient:
        tr = sorted(transient)
        idx = {s: i for i, s in enumerate(tr)}
        a = np.eye(len(tr)) - P[np.ix_(tr, tr)]
        rhs = np.zeros((len(tr), len(classes)))
        for k, comp in enumerate(classes):
            rhs[:, k] = P[np.ix_(tr, list(comp))].sum(axis=1)
        try:
            sol = np.linalg.solve(a, rhs)
        except np.linalg.LinAlgError as e:
            raise SingularSystem(f"absorption solve failed: {e}") from e
        for s in tr:
            absorb[s, :] = sol[idx[s], :]

    star = np.zeros((n, n))
    for k, comp in enumerate(classes):
        row = np.zeros(n)
        row[list(comp)] = stationary[k]
        star += np.outer(absorb[:, k], row)

    return ChainAnalysis(chain=chain, recurrent_classes=classes,
                         transient=transient,
                         stationary=tuple(stationary),
                         absorb=absorb, limit_matrix=star)


def utility_vector(m: Mdp, u: UtilityFn, p: StationaryPolicy) -> np.ndarray:
    """v(s) = sum_a mu(s,a) u(s,a)."""
    v = np.zeros(m.n_states)
    for s in range(m.n_states):
        v[s] = sum(w * u(s, a) for a, w in p.dist(s).items() if w != 0.0)
    return v


def average_utility(ca: ChainAnalysis, m: Mdp, u: UtilityFn,
                    p: StationaryPolicy, start) -> float:
    """Long-run average utility from `start`: the start row of P* times v."""
    v = utility_vector(m, u, p)
    return float(ca.limit_matrix[start, :] @ v)


def efficiency(ca: ChainAnalysis, m: Mdp, r: UtilityFn, c: UtilityFn,
               p: StationaryPolicy, start) -> float:
    """Reward-to-cost ratio from `start`.

    Each recurrent class contributes its own stationary ratio; the result is
    the absorption-probability mixture of class ratios.  Positivity of the
    cost keeps every denominator away from zero.
    """
    vr = utility_vector(m, r, p)
    vc = utility_vector(m, c, p)
    total = 0.0
    for k, comp in enumerate(ca.recurrent_classes):
        w = ca.absorb_prob(start, k)
        if w == 0.0:
            continue
        pi = ca.stationary[k]
        idx = list(comp)
        total += w * float(pi @ vr[idx]) / float(pi @ vc[idx])
    return total


@dataclass(frozen=True)
class PotentialVector:
    """Solution g of (I - P + P*) g = v for one policy and utility."""
    g: np.ndarray
    utility: UtilityFn
    policy: StationaryPolicy


@dataclass(frozen=True)
class DeviationVector:
    """d = (v' - v) + (P' - P) g for an ordered policy pair and a utility."""
    d: np.ndarray
    utility: UtilityFn


def potential_vector(ca: ChainAnalysis, m: Mdp, u: UtilityFn,
                     p: StationaryPolicy) -> PotentialVector:
    """Solve the potential equation by direct dense factorization.

    The system matrix I - P + P* is always invertible; a residual above
    tolerance therefore signals degenerate numerics, not a modeling error.
    """
    v = utility_vector(m, u, p)
    a = np.eye(ca.chain.n_states) - ca.chain.P + ca.limit_matrix
    try:
        g = np.linalg.solve(a, v)
    except np.linalg.LinAlgError as e:
        raise SingularSystem(f"potential solve failed: {e}") from e
    resid = float(np.max(np.abs(a @ g - v)))
    if resid > POTENTIAL_TOL:
        raise SingularSystem(f"potential residual {resid:g} above tolerance")
    return PotentialVector(g=g, utility=u, policy=p)


def deviation_vector(m: Mdp, mu: StationaryPolicy, mu_prime: StationaryPolicy,
                     u: UtilityFn) -> DeviationVector:
    """Deviation of mu_prime from mu w.r.t. u, built on mu's potential."""
    chain = induce_chain(m, mu)
    chain_p = induce_chain(m, mu_prime)
    ca = analyze(chain)
    g = potential_vector(ca, m, u, mu).g
    v = utility_vector(m, u, mu)
    v_p = utility_vector(m, u, mu_prime)
    d = (v_p - v) + (chain_p.P - chain.P) @ g
    return DeviationVector(d=d, utility=u)


def limit_distribution(ca: ChainAnalysis) -> np.ndarray:
    """pi0 P*: the limit distribution seen from the chain's initial state."""
    return ca.chain.pi0 @ ca.limit_matrix


def ratio_perturbation_identity_check(m: Mdp, mu: StationaryPolicy,
                                      mu_prime: StationaryPolicy,
                                      r: UtilityFn, c: UtilityFn,
                                      delta: float):
    """Both sides of the efficiency-difference identity for the mixture
    (1-delta) mu + delta mu'.

    lhs is the direct difference of efficiencies; rhs rebuilds it from the
    deviation vectors of reward and cost.  Requires mu to induce a unichain.
    """
    ca_mu = analyze(induce_chain(m, mu))
    if not ca_mu.is_unichain():
        raise NotUnichain(
            f"{len(ca_mu.recurrent_classes)} recurrent classes under mu")
    mu_delta = mu.mix(mu_prime, delta)
    ca_d = analyze(induce_chain(m, mu_delta))
    start = m.initial
    j_mu = efficiency(ca_mu, m, r, c, mu, start)
    j_delta = efficiency(ca_d, m, r, c, mu_delta, start)
    lhs = j_delta - j_mu

    d_r = deviation_vector(m, mu, mu_prime, r).d
    d_c = deviation_vector(m, mu, mu_prime, c).d
    pi_d = limit_distribution(ca_d)
    vc_d = utility_vector(m, c, mu_delta)
    rhs = delta / float(pi_d @ vc_d) * float(pi_d @ (d_r - j_mu * d_c))
    return lhs, rhs
