"""Seeded random multi-microgrid networks.

Default ranges:

    b ~ U[-1, 0],  g = |b| * U[0, 0.5],  V ~ U[0.95, 1.05],  delta ~ U[-0.5, 0.5],
    d ~ U[1.5, 3],  m ~ U[0.4, 2]
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components, shortest_path

from .netmodel import ACTIVE, PASSIVE, InterfaceParams, Line, Network, Node, build_admittance
from .powerflow import Equilibrium, check_omega_region, flow_active, solve_equilibrium
from .spectral import build_jacobian, build_laplacian, eigenvalues


class SynthError(RuntimeError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    n: int
    seed: int = 0
    avg_degree: float = 4.0
    edge_prob: float | None = None
    b_range: tuple[float, float] = (-1.0, 0.0)
    g_ratio: tuple[float, float] = (0.0, 0.5)
    v_range: tuple[float, float] = (0.95, 1.05)
    delta_range: tuple[float, float] = (-0.5, 0.5)
    d_range: tuple[float, float] = (1.5, 3.0)
    m_range: tuple[float, float] = (0.4, 2.0)
    max_retries: int = 200

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")

    @property
    def p_edge(self) -> float:
        if self.edge_prob is not None:
            return float(self.edge_prob)
        return min(1.0, self.avg_degree / (self.n - 1))


@dataclass(frozen=True)
class SynthCase:
    net: Network
    params: InterfaceParams
    delta_seed: np.ndarray
    equilibrium: Equilibrium | None = None
    perturbation: np.ndarray | None = None


def _random_edges(rng, n, p, max_retries):
    iu, ku = np.triu_indices(n, 1)
    for _ in range(max_retries):
        mask = rng.random(iu.size) < p
        i, k = iu[mask], ku[mask]
        A = np.zeros((n, n), dtype=bool)
        A[i, k] = True
        if connected_components(A, directed=False)[0] == 1:
            return list(zip(i.tolist(), k.tolist()))
    raise SynthError(f"no connected graph after {max_retries} attempts (n={n}, p={p:.3f})")


def generate(cfg: SynthConfig) -> tuple[Network, InterfaceParams, np.ndarray]:
    """Random connected network with parameters drawn from the configured ranges.

    Setpoints are the flows at the sampled angles, so an exact equilibrium
    exists near those angles.
    """
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n
    edges = _random_edges(rng, n, cfg.p_edge, cfg.max_retries)
    ne = len(edges)
    b = rng.uniform(*cfg.b_range, size=ne)
    g = np.abs(b) * rng.uniform(*cfg.g_ratio, size=ne)
    V = rng.uniform(*cfg.v_range, size=n)
    delta = rng.uniform(*cfg.delta_range, size=n)
    d = rng.uniform(*cfg.d_range, size=n)
    m = rng.uniform(*cfg.m_range, size=n)
    nodes = tuple(Node(i, ACTIVE, float(V[i])) for i in range(n))
    lines = tuple(Line(i, k, float(gg), float(bb)) for (i, k), gg, bb in zip(edges, g, b))
    net = Network(nodes, lines)
    p_set = flow_active(build_admittance(net), V, delta)
    params = InterfaceParams(tuple(range(n)), m, d, p_set)
    return net, params, delta


def generate_case(cfg: SynthConfig, solve: bool = True) -> SynthCase:
    net, params, delta = generate(cfg)
    eq = None
    if solve:
        # the sampled angles seed Newton; flat starts stall on large grids
        eq = solve_equilibrium(build_admittance(net), net.voltages, params.p_set, delta0=delta)
    return SynthCase(net, params, delta, eq)


def diameter(net: Network) -> int:
    A = np.zeros((net.n, net.n))
    for ln in net.closed_lines:
        A[ln.i, ln.k] = A[ln.k, ln.i] = 1
    dist = shortest_path(A, unweighted=True, directed=False)
    return int(dist[np.isfinite(dist)].max())


# -- structure-preserving grids ----------------------------------------------

@dataclass(frozen=True)
class DistributionConfig:
    """Grid with active and passive nodes whose lines and loads keep |B/G| in ``ratio``."""

    n_active: int
    n_passive: int
    seed: int = 0
    ratio: tuple[float, float] = (5.0, 7.14)
    y_range: tuple[float, float] = (0.5, 2.0)
    load_range: tuple[float, float] = (0.0, 0.2)
    extra_edges: int = 1
    v_range: tuple[float, float] = (0.95, 1.05)
    delta_range: tuple[float, float] = (-0.3, 0.3)
    d_range: tuple[float, float] = (1.5, 3.0)
    m_range: tuple[float, float] = (0.4, 2.0)


def _admittance_with_ratio(rng, mag_range, ratio):
    mag = rng.uniform(*mag_range)
    r = rng.uniform(*ratio)
    g = mag / np.sqrt(1 + r * r)
    return g, -r * g


def generate_distribution(cfg: DistributionConfig) -> tuple[Network, InterfaceParams, np.ndarray]:
    """Random spanning tree plus a few extra lines; passive nodes carry constant-admittance loads.

    Returns the network, parameters for the active nodes (setpoints zero; they
    depend on the reduced grid) and sampled active-node angles.
    """
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_active + cfg.n_passive
    kinds = [ACTIVE] * cfg.n_active + [PASSIVE] * cfg.n_passive
    perm = rng.permutation(n)
    kinds = [kinds[j] for j in perm]
    pairs = set()
    for pos in range(1, n):
        parent = int(rng.integers(0, pos))
        pairs.add((min(perm[pos], perm[parent]), max(perm[pos], perm[parent])))
    for _ in range(cfg.extra_edges):
        i, k = rng.choice(n, size=2, replace=False)
        pairs.add((min(i, k), max(i, k)))
    lines = []
    for i, k in sorted(pairs):
        g, b = _admittance_with_ratio(rng, cfg.y_range, cfg.ratio)
        lines.append(Line(int(i), int(k), float(g), float(b)))
    V = rng.uniform(*cfg.v_range, size=n)
    nodes = []
    for i in range(n):
        shunt = 0j
        if kinds[i] == PASSIVE and cfg.load_range[1] > 0:
            g, b = _admittance_with_ratio(rng, cfg.load_range, cfg.ratio)
            shunt = complex(g, b)
        nodes.append(Node(i, kinds[i], float(V[i]), shunt))
    net = Network(tuple(nodes), tuple(lines))
    active = net.active
    na = len(active)
    params = InterfaceParams(
        tuple(active),
        rng.uniform(*cfg.m_range, size=na),
        rng.uniform(*cfg.d_range, size=na),
        np.zeros(na),
    )
    delta = rng.uniform(*cfg.delta_range, size=na)
    return net, params, delta


# -- unstable instances -------------------------------------------------------

def planted_unstable(
    seed: int = 0,
    min_growth: float = 0.1,
    verify_T: float | None = None,
    dt: float = 1e-3,
    max_tries: int = 200_000,
) -> SynthCase:
    """Heavily lossy, lightly damped 3-4 node grid whose equilibrium lies in the
    coupling-angle region but has an eigenvalue with Re > ``min_growth``.

    With ``verify_T`` the candidate is only accepted once a 1e-2 rad angle
    perturbation (stored on the case) is seen to lose synchronism within
    ``verify_T`` seconds.
    """
    from .simulate import SwingSystem, integrate

    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        n = int(rng.integers(3, 5))
        iu, ku = np.triu_indices(n, 1)
        mask = rng.random(iu.size) < 0.9
        A = np.zeros((n, n), dtype=bool)
        A[iu[mask], ku[mask]] = True
        if connected_components(A, directed=False)[0] != 1:
            continue
        lines = []
        for i, k in zip(iu[mask].tolist(), ku[mask].tolist()):
            b = -rng.uniform(0.5, 5.0)
            g = abs(b) * rng.uniform(0.0, 3.0)
            lines.append(Line(i, k, float(g), float(b)))
        V = rng.uniform(0.95, 1.05, n)
        d = rng.uniform(0.01, 0.5, n)
        m = rng.uniform(1.0, 10.0, n)
        delta = rng.uniform(-1.2, 1.2, n)
        net = Network(tuple(Node(i, ACTIVE, float(V[i])) for i in range(n)), tuple(lines))
        Y = build_admittance(net)
        if not check_omega_region(Y, delta).in_region:
            continue
        eig = eigenvalues(build_jacobian(build_laplacian(Y, V, delta), m, d))
        if eig.max_real_nonzero <= min_growth:
            continue
        p_set = flow_active(Y, V, delta)
        params = InterfaceParams(tuple(range(n)), m, d, p_set)
        delta = delta - delta[0]
        eq = Equilibrium.from_angles(delta)
        pert = rng.normal(0.0, 1e-2, n)
        if verify_T is not None:
            traj = integrate(SwingSystem(Y, V, m, d, p_set), delta + pert, np.zeros(n), verify_T, dt,
                             store_every=max(1, int(round(verify_T / dt)) // 10))
            if not traj.diverged:
                continue
        return SynthCase(net, params, delta, eq, pert)
    raise SynthError("no unstable instance found")
