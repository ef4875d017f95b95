"""Blending an optimal policy with an exploring one, and what it costs.

The efficiency loss of the blend (1-delta)*optimal + delta*exploring obeys a
closed-form identity built from deviation vectors.  Inverting its worst-case
bound gives a safe blending degree in one shot ('es'); bisecting on the exact
evaluator gives the largest safe degree ('ex').  On a lopsided instance the
one-shot bound is wildly conservative.
"""

from effsynth import (Mdp, StationaryPolicy, UtilityFn, analyze, efficiency,
                      induce_chain, perturbation_degree_estimated,
                      perturbation_degree_exact,
                      ratio_perturbation_identity_check)

m = Mdp(["hub", "way", "far"], ["a", "b"], 0,
        {(0, 0): {0: 1.0}, (0, 1): {1: 1.0},
         (1, 0): {0: 0.9, 2: 0.1},
         (2, 0): {0: 1.0}, (2, 1): {2: 1.0}})
r = UtilityFn({(0, 0): 1.0, (0, 1): 0.0, (1, 0): 0.0,
               (2, 0): 0.0, (2, 1): -50.0}, "reward")
c = UtilityFn.constant(m, 1.0, "cost")
mu_opt = StationaryPolicy.deterministic({0: 0, 1: 0, 2: 0})
mu_irr = StationaryPolicy.uniform(m)

print("identity check (difference of efficiencies vs deviation formula):")
for delta in (0.1, 0.4, 0.8):
    lhs, rhs = ratio_perturbation_identity_check(m, mu_opt, mu_irr, r, c,
                                                 delta)
    print(f"  delta={delta}: lhs={lhs:+.9f} rhs={rhs:+.9f} "
          f"gap={abs(lhs - rhs):.2e}")

print("\nblending degree for a 0.01 efficiency budget:")
es = perturbation_degree_estimated(m, mu_opt, mu_irr, r, c, 0.01)
ex = perturbation_degree_exact(m, mu_opt, mu_irr, r, c, 0.01)
print(f"  one-shot bound: delta={es.delta:.6f} "
      f"(worst-state gap {es.d_inf:.2f}, min cost {es.c_min})")
print(f"  bisection:      delta={ex.delta:.6f}")
print(f"  conservatism: {ex.delta / es.delta:.0f}x")

print("\nactual efficiency along the blend:")
ca = analyze(induce_chain(m, mu_opt))
base = efficiency(ca, m, r, c, mu_opt, 0)
for delta in (es.delta, ex.delta, 2 * ex.delta):
    mu_d = mu_opt.mix(mu_irr, delta)
    cad = analyze(induce_chain(m, mu_d))
    val = efficiency(cad, m, r, c, mu_d, 0)
    print(f"  delta={delta:.5f}: efficiency {val:.6f} (loss {base - val:.6f})")
