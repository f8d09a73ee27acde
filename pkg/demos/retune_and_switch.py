"""Fix an uncertified grid two ways: local retuning, then line switching."""
from mugrid.certificates import certify_lossy
from mugrid.control import TuneBounds, search_line_switching, stabilize
from mugrid.synth import SynthConfig, generate_case

c = generate_case(SynthConfig(n=8, seed=3, avg_degree=5))
rep = certify_lossy(c.net, c.equilibrium, c.params)
print(rep.table())

# each node only looks at its own lhs and its own (d, m)
bounds = TuneBounds.wide(c.net.n, margin=0.01)
plan = stabilize(c.net, c.equilibrium, c.params, bounds)
for i in plan.changed:
    print(f"node {i}: d {c.params.d[i]:.3f} -> {plan.d[i]:.3f}, m {c.params.m[i]:.3f} -> {plan.m[i]:.3f}")
print("after retuning:", plan.report.verdict)

# tight actuator limits: retuning alone is not enough
tight = TuneBounds(c.params.d, c.params.d * 1.2, c.params.m * 0.9, c.params.m, margin=0.01)
plan = stabilize(c.net, c.equilibrium, c.params, tight)
print("tight bounds feasible:", plan.feasible, "infeasible nodes", plan.infeasible)

# opening lines lowers the neighbour sums at both ends
sw = search_line_switching(c.net, c.params, budget=3, delta0=c.equilibrium.delta)
print("\n".join(sw.log))
print("opened", sw.lines_opened, "verdict", sw.report.verdict)
