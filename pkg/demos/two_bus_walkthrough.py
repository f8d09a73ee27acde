"""Two microgrids joined by one line: flows, Laplacian, spectrum, certificate."""
import numpy as np

from mugrid.certificates import certify_lossy
from mugrid.netmodel import InterfaceParams, Line, Network, Node, build_admittance
from mugrid.powerflow import check_omega_region, flow_active, flow_reactive, solve_equilibrium
from mugrid.spectral import build_jacobian, build_laplacian, eigenvalues

net = Network((Node(0), Node(1)), (Line(0, 1, g=0.1, b=-1.0),))
Y = build_admittance(net)
print("Y =\n", Y)

# ask node 0 to export 0.1 p.u.; node 1 is the reference and absorbs losses
p_set = np.array([0.1, -0.1])
eq = solve_equilibrium(Y, net.voltages, p_set, ref=1)
print("angles", eq.delta, "slack at reference", eq.slack)
print("P", flow_active(Y, net.voltages, eq.delta))
print("Q", flow_reactive(Y, net.voltages, eq.delta))
print("coupling-angle check", check_omega_region(Y, eq.delta).to_dict())

L = build_laplacian(Y, net.voltages, eq.delta)
params = InterfaceParams.uniform(2, m=0.5, d=2.0, p_set=p_set)
eig = eigenvalues(build_jacobian(L, params.m, params.d))
print("eigenvalues", np.round(np.sort_complex(eig.values), 4))
print("classification", eig.to_dict())

rep = certify_lossy(net, eq, params)
print(rep.table())

# weak damping breaks the certificate even though the grid is still stable here
weak = params.with_values(d=[0.5, 0.5], m=[2.0, 2.0])
print(certify_lossy(net, eq, weak).table())
print("still lhp:", eigenvalues(build_jacobian(L, weak.m, weak.d)).lhp)
