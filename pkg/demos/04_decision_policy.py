"""
The decision core
=================

Runs value iteration with per-state discounts on the shipped default
configuration, prints the optimal and fallback policy per emotion, and
analyzes the chain the optimal policy induces.
"""

import numpy as np

from affectloop.mdp import (
    check_ergodicity,
    default_mdp_model,
    lookup_action,
    policy_chain,
    stationary_distribution,
    value_iteration,
)

model = default_mdp_model()
policy = value_iteration(model)

print(f"converged in {policy.iterations} iterations (residual {policy.residual:.1e})\n")
print(f"{'state':<10} {'V(s)':>7}   optimal            sub-optimal")
for state in model.states:
    print(f"{state:<10} {policy.value_function[state]:7.3f}   "
          f"{policy.optimal[state]:<18} {policy.suboptimal[state]}")

print("\nFallback lookups when the teacher rules actions out:")
for infeasible in (set(), {"simplify_content"}, {"simplify_content", "decrease_pace"}):
    action, rank = lookup_action(policy, "confused", infeasible)
    ruled_out = ", ".join(sorted(infeasible)) or "nothing"
    print(f"  confused with {ruled_out} infeasible -> {action} ({rank})")

chain = policy_chain(model, policy.optimal)
report = check_ergodicity(chain)
pi = stationary_distribution(chain)
print(f"\noptimal-policy chain: irreducible={report.irreducible} "
      f"aperiodic={report.aperiodic} spectral gap={report.spectral_gap:.3f}")
print("stationary distribution:",
      {s: round(float(p), 3) for s, p in zip(model.states, pi)})
print("-> the controller parks most long-run mass on curious, as intended.")

# discounts weigh future value by *successor* state
print("\nper-state discounts:", {s: float(g) for s, g in zip(model.states, model.discounts)})
