import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mugrid.certificates import (
    CERTIFIED, COR1, LOSSLESS_STABLE, THM1C, THM2, UNCERTIFIED, certify_lossy, certify_state,
    certify_structure_preserving, certify_topology, damping_budget, passive_voltages, stability_index,
)
from mugrid.kron import check_assumption1, check_assumption2, kron_reduce
from mugrid.netmodel import InterfaceParams, Network, Node, build_admittance
from mugrid.powerflow import Equilibrium, check_omega_region
from mugrid.spectral import build_jacobian, build_laplacian, eigenvalues
from mugrid.synth import DistributionConfig, generate_distribution

from conftest import chain, random_case, two_bus
from reference_data import FOUR_UG_AFTER

NU = (5.0, 7.14)


def sine_lhs(Y, V, delta):
    """-Q_i - V_i^2 B_ii as the sum over neighbours of V_i V_k |Y_ik| sin(phi_ik)."""
    n = len(V)
    out = np.zeros(n)
    for i in range(n):
        for k in range(n):
            if i != k and Y[i, k] != 0:
                out[i] += V[i] * V[k] * abs(Y[i, k]) * np.sin(np.angle(Y[i, k]) - delta[i] + delta[k])
    return out


def test_index_zero_lhs():
    assert stability_index(0.0, 1.0, 0.0, 1.0, 1.0) == pytest.approx(-0.5)


def test_index_retuned_node_one():
    m, d, S = FOUR_UG_AFTER[0]
    rhs = damping_budget(d, m)
    assert rhs == pytest.approx(21.3444, abs=1e-12)
    assert rhs + S == pytest.approx(21.2704, abs=1e-12)


def test_index_rejects_nonpositive():
    with pytest.raises(ValueError):
        stability_index(0, 1, 0, 1, 0)


def test_index_monotone_in_damping_and_inertia():
    args = (0.2, 1.02, -3.0)
    h = 1e-6
    for d, m in [(1.5, 0.4), (2.0, 1.0), (3.0, 2.0)]:
        assert (stability_index(*args, d + h, m) - stability_index(*args, d - h, m)) / (2 * h) < 0
        assert (stability_index(*args, d, m + h) - stability_index(*args, d, m - h)) / (2 * h) > 0


def test_lossless_verdict_ignores_parameters():
    c = random_case(3, g_ratio=(0.0, 0.0))
    tiny = c.params.with_values(d=np.full(c.net.n, 0.01), m=np.full(c.net.n, 50.0))
    rep = certify_lossy(c.net, c.equilibrium, tiny)
    assert rep.verdict == LOSSLESS_STABLE and rep.certified
    assert rep.which_condition == THM1C


def test_two_bus_lossy():
    net = two_bus(g=0.1, b=-1.0)
    params = InterfaceParams.uniform(2, m=0.5, d=2.0)
    rep = certify_lossy(net, Equilibrium.from_angles([0.0, 0.0]), params)
    Y = build_admittance(net)
    np.testing.assert_allclose(rep.lhs, sine_lhs(Y, np.ones(2), np.zeros(2)), atol=1e-15)
    np.testing.assert_allclose(rep.lhs, [1.0, 1.0], atol=1e-15)
    assert all(c.rhs == 4.0 for c in rep.nodes)
    assert rep.verdict == CERTIFIED


def test_positive_index_lists_offender():
    net = two_bus(g=0.1, b=-1.0)
    # rhs = 0.5 at node 1 so S_1 = 1 - 0.5 = +0.5
    params = InterfaceParams((0, 1), [0.5, 1.0], [2.0, 1.0], [0.0, 0.0])
    rep = certify_lossy(net, Equilibrium.from_angles([0.0, 0.0]), params)
    assert rep.nodes[1].index == pytest.approx(0.5)
    assert rep.verdict == UNCERTIFIED and rep.offending == [1]
    assert "index_positive" in rep.reasons


def test_equality_counts_as_satisfied_and_margin_tightens():
    net = two_bus(g=0.1, b=-1.0)
    params = InterfaceParams.uniform(2, m=0.5, d=1.0)  # rhs = 1 = lhs
    eq = Equilibrium.from_angles([0.0, 0.0])
    assert certify_lossy(net, eq, params).certified
    assert not certify_lossy(net, eq, params, margin=0.01).certified


def test_outside_region_refused():
    net = two_bus(g=0.1, b=-1.0)
    rep = certify_lossy(net, Equilibrium.from_angles([2.0, 0.0]), InterfaceParams.uniform(2, m=0.1, d=5.0))
    assert rep.verdict == UNCERTIFIED and "omega_violation" in rep.reasons
    assert not rep.in_omega


def test_shunt_flip_flagged():
    net = Network((Node(0, shunt=3j), Node(1)), two_bus(g=0.1).lines)
    rep = certify_lossy(net, Equilibrium.from_angles([0.0, 0.0]), InterfaceParams.uniform(2, m=0.5, d=2.0))
    assert rep.shunt_flips == [0]


def test_topology_examples():
    rep = certify_topology(two_bus(), InterfaceParams.uniform(2, m=1.0, d=2.0))
    np.testing.assert_allclose(rep.lhs, [1.0, 1.0])
    assert rep.certified and rep.which_condition == COR1
    iso = Network((Node(0),), ())
    rep = certify_topology(iso, InterfaceParams.uniform(1, m=100.0, d=0.01))
    assert rep.lhs[0] == 0 and rep.certified


def test_implication_chain_topology_lossy_spectrum():
    both = 0
    for s in range(1000):
        c = random_case(s, n_range=(3, 8), d_range=(3.0, 6.0), m_range=(0.4, 1.0))
        Y = build_admittance(c.net)
        if not check_omega_region(Y, c.equilibrium.delta).in_region:
            continue
        topo = certify_topology(c.net, c.params)
        lossy = certify_lossy(c.net, c.equilibrium, c.params)
        assert np.all(lossy.lhs <= topo.lhs + 1e-12)
        if topo.certified:
            both += 1
            assert lossy.certified
        if lossy.certified:
            L = build_laplacian(Y, c.net.voltages, c.equilibrium.delta)
            eig = eigenvalues(build_jacobian(L, c.params.m, c.params.d))
            assert eig.lhp and eig.zero_count == 1
    assert both > 50


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6))
def test_lhs_equals_sine_sum(seed):
    c = random_case(seed)
    rep = certify_lossy(c.net, c.equilibrium, c.params)
    Y = build_admittance(c.net)
    np.testing.assert_allclose(rep.lhs, sine_lhs(Y, c.net.voltages, c.equilibrium.delta), atol=1e-12)
    assert np.all(np.isfinite(rep.index))
    if rep.verdict == CERTIFIED:
        assert all(n.satisfied for n in rep.nodes)


def test_structure_preserving_without_passive_matches_lossy():
    c = random_case(6)
    a = certify_structure_preserving(c.net, c.params, c.equilibrium.delta, *NU)
    b = certify_lossy(c.net, c.equilibrium, c.params)
    np.testing.assert_allclose(a.lhs, b.lhs, atol=1e-12)
    assert a.certified == b.certified and a.which_condition == THM2


def test_structure_preserving_chain():
    ya, yb = complex(0.1, -0.6), complex(0.2, -1.1)
    net = chain([ya, yb], kinds=["active", "passive", "active"])
    params = InterfaceParams((0, 2), [0.5, 0.5], [2.0, 2.0], [0.0, 0.0])
    delta = np.array([0.05, -0.05])
    rep = certify_structure_preserving(net, params, delta, *NU)
    assert rep.certified
    assert rep.cross_check is True
    reduced = rep.extra["reduced_report"]
    # original-network lhs dominates the reduced-network lhs
    assert np.all(reduced.lhs <= rep.lhs + 1e-12)
    ys = ya * yb / (ya + yb)
    np.testing.assert_allclose(rep.extra["reduced_Y"], [[ys, -ys], [-ys, ys]], atol=1e-12)


def test_passive_voltages_zero_injection():
    net, params, delta = generate_distribution(DistributionConfig(3, 2, seed=4))
    Y = build_admittance(net)
    a = net.active
    U = passive_voltages(Y, a, net.voltages[a] * np.exp(1j * delta))
    np.testing.assert_allclose((Y @ U)[net.passive], 0, atol=1e-12)


def test_structure_preserving_implies_reduced_certificate():
    used = 0
    for s in range(200):
        net, params, delta = generate_distribution(DistributionConfig(3 + s % 4, 1 + s % 3, seed=s))
        Y = build_admittance(net)
        if not (check_assumption1(Y).ok and check_assumption2(Y, *NU, include_diagonal=True).ok):
            continue
        params = params.with_values(d=np.full(len(net.active), 4.0), m=np.full(len(net.active), 0.5))
        rep = certify_structure_preserving(net, params, delta, *NU)
        if rep.certified:
            used += 1
            assert rep.cross_check
    assert used > 50


def _decimals(x):
    text = f"{x}".split(".")
    return len(text[1]) if len(text) > 1 else 0


def test_table_gaps_within_rounding_intervals():
    # the printed (m, d, S) are rounded; every node's change of d^2/2m must be
    # reachable from the change of S once each entry is widened by half an ulp
    from reference_data import FOUR_UG_BEFORE

    for before, after in zip(FOUR_UG_BEFORE, FOUR_UG_AFTER):
        (m0, d0, s0), (m1, d1, s1) = before, after
        h = lambda x: 0.5 * 10.0 ** -max(2, _decimals(x))
        budget_lo = (d1 - h(d1)) ** 2 / (2 * (m1 + h(m1))) - (d0 + h(d0)) ** 2 / (2 * (m0 - h(m0)))
        budget_hi = (d1 + h(d1)) ** 2 / (2 * (m1 - h(m1))) - (d0 - h(d0)) ** 2 / (2 * (m0 + h(m0)))
        ds_lo = (s0 - h(s0)) - (s1 + h(s1))
        ds_hi = (s0 + h(s0)) - (s1 - h(s1))
        assert budget_lo <= ds_hi and ds_lo <= budget_hi
