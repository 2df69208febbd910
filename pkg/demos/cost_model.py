"""Expected cost of a routing mix, checked against simulation."""

from triage.costmodel import (CostParams, RoutingMix, cost_gate, expected_cost,
                              mix_scenario, savings_vs_heavy, simulate_policy)

costs = CostParams(c_L=1, c_S=3, c_H=15)
mix = RoutingMix(r_L=0.5, r_S=0.3, f_L=0.1, f_S=0.05)

print("closed form cost per task:", expected_cost(costs, mix))      # 5.375
print("savings vs always heavy:  ", savings_vs_heavy(costs, mix))   # 9.625

arrays, policy = mix_scenario(mix, 200_000)
sim = simulate_policy(arrays, policy, costs, seed=1)
print(f"simulated: {sim.pooled_mean:.3f} +/- {sim.standard_error:.3f}")

# the light tier only pays off when it passes more often than c_L / c_H
for rate in (0.05, 1 / 15, 0.10):  # exactly at the ratio does not pass
    gate = cost_gate(rate, costs.c_L, costs.c_H)
    print(f"light pass rate {rate:.4f}: threshold {gate.threshold:.4f}, passed={gate.passed}")
