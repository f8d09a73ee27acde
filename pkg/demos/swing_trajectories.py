"""Simulate a certified grid and a planted unstable one; write both to CSV."""
import csv

import numpy as np

from mugrid.certificates import certify_lossy
from mugrid.control import TuneBounds, stabilize
from mugrid.simulate import SwingSystem, assess_convergence, integrate
from mugrid.synth import SynthConfig, generate_case, planted_unstable

c = generate_case(SynthConfig(n=6, seed=5))
plan = stabilize(c.net, c.equilibrium, c.params, TuneBounds.wide(c.net.n))
params = c.params.with_values(m=plan.m, d=plan.d)
print("certified:", certify_lossy(c.net, c.equilibrium, params).certified)

sys_ = SwingSystem.from_network(c.net, params)
kick = np.random.default_rng(0).normal(0, 1e-2, c.net.n)
stable = integrate(sys_, c.equilibrium.delta + kick, np.zeros(c.net.n), 50.0, store_every=100)
print("stable run:", assess_convergence(stable), "final |omega|", np.abs(stable.omega[-1]).max())

bad = planted_unstable(seed=0, verify_T=50.0)
unstable = integrate(SwingSystem.from_network(bad.net, bad.params), bad.delta_seed + bad.perturbation,
                     np.zeros(bad.net.n), 50.0, store_every=100)
print("planted run:", assess_convergence(unstable), unstable.divergence_reason, "at t =", unstable.t[-1])

for name, traj in (("stable.csv", stable), ("unstable.csv", unstable)):
    n = traj.delta.shape[1]
    with open(name, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"delta_{i}" for i in range(n)] + [f"omega_{i}" for i in range(n)])
        w.writerows(traj.to_rows().tolist())
    print("wrote", name)
