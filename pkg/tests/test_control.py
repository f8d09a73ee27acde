import inspect

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mugrid.certificates import certify_lossy, certify_topology
from mugrid.control import (
    TuneBounds, braess_delta, search_line_switching, stabilize, tune_distributed, tune_node,
)
from mugrid.netmodel import OPEN, InterfaceParams, Line, Network, Node, build_admittance, is_connected, set_line_status
from mugrid.powerflow import flow_active
from mugrid.spectral import build_jacobian, build_laplacian, eigenvalues

from conftest import random_case, two_bus


def test_damping_only_retune():
    t = tune_node(1.0, 1.0, 1.0, d_max=10.0, m_min=0.1, margin=0.05)
    assert t.d == pytest.approx(np.sqrt(2.1))
    assert t.d == pytest.approx(1.4491, abs=1e-4)
    assert t.m == 1.0 and t.changed and t.feasible


def test_satisfied_node_unchanged():
    # S = 1 - 2^2/2 = -1 < -margin
    t = tune_node(1.0, 2.0, 1.0, d_max=10.0, m_min=0.1, margin=0.01)
    assert (t.d, t.m, t.changed) == (2.0, 1.0, False)


def test_two_stage_retune():
    t = tune_node(1.0, 1.0, 1.0, d_max=1.2, m_min=0.4, margin=0.05)
    assert t.d == pytest.approx(1.2)
    assert t.m == pytest.approx(1.44 / 2.1)
    assert t.m == pytest.approx(0.6857, abs=1e-4)
    assert t.d**2 / (2 * t.m) == pytest.approx(1.05)


def test_infeasible_bounds_flagged():
    t = tune_node(10.0, 1.0, 1.0, d_max=1.2, m_min=0.5, margin=0.05)
    assert not t.feasible


def test_inertia_preference():
    t = tune_node(1.0, 1.0, 1.0, d_max=10.0, m_min=0.1, margin=0.05, prefer="inertia")
    assert t.d == 1.0 and t.m == pytest.approx(1 / 2.1)
    with pytest.raises(ValueError):
        tune_node(1.0, 1.0, 1.0, 10.0, 0.1, prefer="nope")


def test_node_rule_sees_only_local_scalars():
    params = list(inspect.signature(tune_node).parameters)
    assert params == ["lhs", "d", "m", "d_max", "m_min", "margin", "prefer"]


@settings(max_examples=200, deadline=None)
@given(st.floats(-5, 50), st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.0, 0.5))
def test_tuned_node_meets_budget(lhs, d, m, eps):
    t = tune_node(lhs, d, m, d_max=1e3, m_min=1e-3, margin=eps)
    assert t.feasible
    assert t.d**2 / (2 * t.m) >= (lhs + eps) * (1 - 1e-12) - 1e-12


def test_bounds_validation():
    with pytest.raises(ValueError):
        TuneBounds(2.0, 1.0, 0.1, 1.0)
    with pytest.raises(ValueError):
        TuneBounds(0.0, 1.0, 0.1, 1.0)
    b = TuneBounds.wide(3)
    assert b.d_max.shape == (3,)


def test_stabilize_certifies_uncertified_cases():
    done = 0
    for s in range(300):
        c = random_case(s)
        before = certify_lossy(c.net, c.equilibrium, c.params)
        if before.certified:
            continue
        plan = stabilize(c.net, c.equilibrium, c.params, TuneBounds.wide(c.net.n))
        assert plan.feasible and plan.report.certified
        assert set(plan.changed) >= set(before.offending)
        L = build_laplacian(build_admittance(c.net), c.net.voltages, c.equilibrium.delta)
        assert eigenvalues(build_jacobian(L, plan.m, plan.d)).lhp
        done += 1
        if done == 50:
            break
    assert done == 50


def test_braess_two_bus():
    assert braess_delta(two_bus(), (0, 1)) == (1.0, 1.0)
    zero = Network((Node(0), Node(1)), (Line(0, 1, 0.0, 0.0),))
    assert braess_delta(zero, (0, 1)) == (0.0, 0.0)


def test_braess_locality_on_triangle():
    net = Network(tuple(Node(i) for i in range(3)), (Line(0, 1, 0.1, -1), Line(1, 2, 0.2, -0.5), Line(0, 2, 0.1, -0.7)))
    before = certify_topology(net, InterfaceParams.uniform(3)).lhs
    after = certify_topology(set_line_status(net, 0, 1, OPEN), InterfaceParams.uniform(3)).lhs
    assert after[2] == before[2]
    a, b = braess_delta(net, (0, 1))
    assert before[0] - after[0] == pytest.approx(a, abs=1e-12)
    assert before[1] - after[1] == pytest.approx(b, abs=1e-12)


def test_switching_on_certified_net_is_empty():
    c = random_case(2, d_range=(8.0, 9.0), m_range=(0.4, 0.5))
    plan = search_line_switching(c.net, c.params, budget=2)
    assert plan.report.certified and plan.lines_opened == []


def test_switching_budget_zero_uncertified():
    c = random_case(2)
    assert not certify_lossy(c.net, c.equilibrium, c.params).certified
    plan = search_line_switching(c.net, c.params, budget=0)
    assert not plan.feasible and plan.lines_opened == []


def test_switching_plans_recertify_and_keep_connectivity():
    wins = trials = 0
    for s in range(60):
        c = random_case(s, n_range=(5, 8), avg_degree=5, d_range=(1.8, 2.2), m_range=(0.6, 0.8))
        rep = certify_lossy(c.net, c.equilibrium, c.params)
        # marginal violations only
        if rep.certified or len(rep.offending) > 2:
            continue
        trials += 1
        plan = search_line_switching(c.net, c.params, budget=2)
        assert len(plan.lines_opened) <= 2
        assert is_connected(plan.network)
        if plan.feasible:
            wins += 1
            eq = plan.equilibrium
            P = flow_active(build_admittance(plan.network), plan.network.voltages, eq.delta)
            assert np.abs(P - c.params.p_set)[1:].max() <= 1e-10
            assert certify_lossy(plan.network, eq, c.params).certified
    assert trials >= 20
    assert wins > trials / 2
