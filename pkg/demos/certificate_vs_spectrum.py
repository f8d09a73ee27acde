"""How often does the local certificate fire on random lossy grids, and is it ever wrong?"""
import numpy as np

from mugrid.certificates import certify_lossy, certify_topology
from mugrid.netmodel import build_admittance
from mugrid.spectral import build_jacobian, build_laplacian, eigenvalues
from mugrid.synth import SynthConfig, generate_case

counts = {"cases": 0, "topology": 0, "lossy": 0, "lhp": 0, "wrong": 0}
margins = []
for seed in range(2000):
    c = generate_case(SynthConfig(n=3 + seed % 10, seed=seed))
    Y = build_admittance(c.net)
    L = build_laplacian(Y, c.net.voltages, c.equilibrium.delta)
    eig = eigenvalues(build_jacobian(L, c.params.m, c.params.d))
    rep = certify_lossy(c.net, c.equilibrium, c.params)
    counts["cases"] += 1
    counts["topology"] += certify_topology(c.net, c.params).certified
    counts["lossy"] += rep.certified
    counts["lhp"] += eig.lhp
    counts["wrong"] += rep.certified and not eig.lhp
    margins.append((rep.index.max(), eig.max_real_nonzero))

print(counts)
# the worst stability index loosely tracks the slowest mode
m = np.array(margins)
print("corr(max S_i, max Re lambda) =", np.corrcoef(m[:, 0], m[:, 1])[0, 1].round(3))
