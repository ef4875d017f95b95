"""End-component anatomy of a small labeled MDP.

A four-state model with two actions: one state loops on itself forever, two
states form a closed loop that can also idle, and the initial state must pick
a side.  With the Rabin pair (avoid {3}, visit {4}) only the right loop can
win, and only by idling at state 4.
"""

from effsynth import (ProductMdp, almost_sure_region, amec_filter,
                      maec_decompose, mec_decompose)

trans = {
    (0, 0): {1: 1.0},   # 1 -a1-> 2
    (0, 1): {2: 1.0},   # 1 -a2-> 3
    (1, 0): {1: 1.0},   # 2 -a1-> 2 (a dead end loop)
    (2, 0): {3: 1.0},   # 3 -a1-> 4
    (3, 0): {2: 1.0},   # 4 -a1-> 3
    (3, 1): {3: 1.0},   # 4 -a2-> 4
}
pm = ProductMdp(["1", "2", "3", "4"], ["a1", "a2"], 0, trans,
                acc_pairs=[({2}, {3})])


def show(tag, components):
    for ec in components:
        acts = {pm.state_names[s]: sorted(pm.action_names[a] for a in aa)
                for s, aa in ec.act}
        print(f"  {tag}: states {sorted(pm.state_names[s] for s in ec.state_set)} "
              f"actions {acts}")


print("maximal end components (closed + strongly connected):")
show("MEC", mec_decompose(pm))

print("\nmaximal accepting end components (avoid B, touch G):")
show("MAEC", maec_decompose(pm))

print("\naccepting MECs (contain at least one MAEC):")
show("AMEC", amec_filter(pm))

region = sorted(pm.state_names[s] for s in almost_sure_region(pm))
print(f"\nstates that can satisfy the task with probability one: {region}")
print("state 2 is missing: once there, the dead-end loop never reaches G.")
