"""Local stability certificates and the per-node stability index.

Every certificate compares a per-node left-hand side against d_i^2 / (2 m_i);
the index S_i = lhs_i - d_i^2 / (2 m_i) is nonpositive at certified nodes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kron
from .netmodel import InterfaceParams, Network, build_admittance, is_connected
from .powerflow import Equilibrium, check_omega_region, complex_power, flow_reactive

LOSSLESS_STABLE = "lossless_stable"
CERTIFIED = "certified"
UNCERTIFIED = "uncertified"

THM1C = "thm1c"
COR1 = "cor1"
THM2 = "thm2"


def stability_index(Q, V, B_ii, d, m):
    """S = -Q - V^2 B_ii - d^2 / (2 m)."""
    d = np.asarray(d, dtype=float)
    m = np.asarray(m, dtype=float)
    if np.any(m <= 0) or np.any(d <= 0):
        raise ValueError("damping and inertia must be positive")
    V = np.asarray(V, dtype=float)
    return -np.asarray(Q) - V**2 * np.asarray(B_ii) - d**2 / (2 * m)


def damping_budget(d, m):
    d = np.asarray(d, dtype=float)
    m = np.asarray(m, dtype=float)
    if np.any(m <= 0) or np.any(d <= 0):
        raise ValueError("damping and inertia must be positive")
    return d**2 / (2 * m)


@dataclass(frozen=True)
class NodeCertificate:
    node: int
    lhs: float
    rhs: float
    index: float
    satisfied: bool

    def to_dict(self) -> dict:
        return {
            "node": int(self.node),
            "lhs": float(self.lhs),
            "rhs": float(self.rhs),
            "S": float(self.index),
            "satisfied": bool(self.satisfied),
        }


@dataclass
class CertReport:
    nodes: list
    verdict: str
    which_condition: str
    reasons: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    in_omega: bool | None = None
    phi_margin: float | None = None
    shunt_flips: list = field(default_factory=list)
    cross_check: bool | None = None
    extra: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.verdict in (CERTIFIED, LOSSLESS_STABLE)

    @property
    def offending(self) -> list:
        return [c.node for c in self.nodes if not c.satisfied]

    @property
    def lhs(self) -> np.ndarray:
        return np.array([c.lhs for c in self.nodes])

    @property
    def index(self) -> np.ndarray:
        return np.array([c.index for c in self.nodes])

    def to_dict(self) -> dict:
        out = {
            "verdict": self.verdict,
            "which_condition": self.which_condition,
            "nodes": [c.to_dict() for c in self.nodes],
            "reasons": list(self.reasons),
            "warnings": list(self.warnings),
            "offending": [int(i) for i in self.offending],
        }
        if self.in_omega is not None:
            out["in_omega"] = bool(self.in_omega)
            out["phi_margin"] = float(self.phi_margin)
        if self.shunt_flips:
            out["shunt_flips"] = [int(i) for i in self.shunt_flips]
        if self.cross_check is not None:
            out["cross_check"] = bool(self.cross_check)
        return out

    def table(self) -> str:
        rows = [f"{'node':>6} {'lhs':>12} {'rhs':>12} {'S_i':>12}  ok"]
        for c in self.nodes:
            rows.append(
                f"{c.node:>6d} {c.lhs:>12.6g} {c.rhs:>12.6g} {c.index:>12.6g}  {'yes' if c.satisfied else 'NO'}"
            )
        rows.append(f"verdict: {self.verdict} ({self.which_condition})")
        return "\n".join(rows)


def _node_certs(ids, lhs, rhs, margin):
    idx = lhs - rhs
    return [
        NodeCertificate(int(i), float(a), float(b), float(s), bool(s <= -margin))
        for i, a, b, s in zip(ids, lhs, rhs, idx)
    ]


def certify_state(Y, V, delta, m, d, margin: float = 0.0, ids=None, lossless: bool | None = None,
                  connected: bool | None = None) -> CertReport:
    """Reactive-power certificate on a bare admittance matrix with every node active."""
    Y = np.asarray(Y, dtype=complex)
    V = np.asarray(V, dtype=float)
    delta = np.asarray(delta, dtype=float)
    n = len(V)
    ids = list(range(n)) if ids is None else list(ids)
    Q = flow_reactive(Y, V, delta)
    B = np.diag(Y).imag
    lhs = -Q - V**2 * B
    rhs = damping_budget(d, m)
    certs = _node_certs(ids, lhs, rhs, margin)
    om = check_omega_region(Y, delta)
    if lossless is None:
        off = Y.copy()
        np.fill_diagonal(off, 0)
        lossless = bool(np.all(off.real == 0))
    if connected is None:
        from scipy.sparse.csgraph import connected_components

        adj = np.abs(Y) > 0
        np.fill_diagonal(adj, False)
        connected = connected_components(adj, directed=False)[0] <= 1
    reasons = []
    if not om.in_region:
        reasons.append("omega_violation")
    if not connected:
        reasons.append("disconnected")
    if reasons:
        verdict = UNCERTIFIED
    elif lossless:
        verdict = LOSSLESS_STABLE
    elif all(c.satisfied for c in certs):
        verdict = CERTIFIED
    else:
        verdict = UNCERTIFIED
        reasons.append("index_positive")
    flips = [ids[i] for i in range(n) if B[i] > 0]
    return CertReport(certs, verdict, THM1C, reasons, [], om.in_region, om.worst_margin, flips)


def _params_for(net: Network, params: InterfaceParams | None, ids):
    if params is None:
        raise ValueError("interface parameters are required")
    return params.select(ids)


def certify_lossy(net: Network, equilibrium, params: InterfaceParams, margin: float = 0.0) -> CertReport:
    """Check -Q_i - V_i^2 B_ii <= d_i^2 / (2 m_i) at every node of a linking grid.

    Lossless grids with the equilibrium inside the coupling-angle region are
    reported as ``lossless_stable`` whatever the index values.
    """
    p = _params_for(net, params, list(range(net.n)))
    delta = equilibrium.delta if isinstance(equilibrium, Equilibrium) else np.asarray(equilibrium, float)
    Y = build_admittance(net)
    rep = certify_state(Y, net.voltages, delta, p.m, p.d, margin,
                        lossless=net.is_lossless, connected=is_connected(net))
    if not rep.in_omega:
        rep.warnings.append("equilibrium outside the coupling-angle region; certificate hypotheses fail")
    return rep


def topology_lhs(Y, V) -> np.ndarray:
    """sum_{k != i} V_i V_k |Y_ik|."""
    A = np.abs(np.asarray(Y, dtype=complex))
    np.fill_diagonal(A, 0.0)
    V = np.asarray(V, dtype=float)
    return V * (A @ V)


def certify_topology(net: Network, params: InterfaceParams, margin: float = 0.0,
                     equilibrium=None) -> CertReport:
    """Equilibrium-free certificate sum_{k != i} V_i V_k |Y_ik| <= d_i^2 / (2 m_i).

    It still presumes the equilibrium lies in the coupling-angle region; pass
    ``equilibrium`` to have that checked.
    """
    p = _params_for(net, params, list(range(net.n)))
    Y = build_admittance(net)
    lhs = topology_lhs(Y, net.voltages)
    certs = _node_certs(range(net.n), lhs, damping_budget(p.d, p.m), margin)
    reasons = []
    in_omega = margin_phi = None
    if equilibrium is not None:
        delta = equilibrium.delta if isinstance(equilibrium, Equilibrium) else np.asarray(equilibrium, float)
        om = check_omega_region(Y, delta)
        in_omega, margin_phi = om.in_region, om.worst_margin
        if not om.in_region:
            reasons.append("omega_violation")
    if not is_connected(net):
        reasons.append("disconnected")
    if not all(c.satisfied for c in certs):
        reasons.append("index_positive")
    verdict = CERTIFIED if not reasons else UNCERTIFIED
    return CertReport(certs, verdict, COR1, reasons, [], in_omega, margin_phi)


def passive_voltages(Y, active, U_active) -> np.ndarray:
    """Complex voltages of all nodes when passive nodes inject no current."""
    Y = np.asarray(Y, dtype=complex)
    n = Y.shape[0]
    active = list(active)
    passive = [i for i in range(n) if i not in active]
    U = np.zeros(n, dtype=complex)
    U[active] = U_active
    if passive:
        Ybb = Y[np.ix_(passive, passive)]
        Yba = Y[np.ix_(passive, active)]
        U[passive] = -np.linalg.solve(Ybb, Yba @ np.asarray(U_active))
    return U


def certify_structure_preserving(
    full_net: Network,
    params: InterfaceParams,
    delta_active,
    nu_min: float,
    nu_max: float,
    active=None,
    margin: float = 0.0,
) -> CertReport:
    """Certificate for the Kron-reduced grid stated with original-network quantities.

    ``delta_active`` is the equilibrium of the reduced grid (angles at the
    active nodes, in ``active`` order). Passive voltages follow from zero
    injection, so Q_k at active nodes equals its reduced-grid value while
    B_kk is taken from the original admittance matrix. The report's
    ``cross_check`` is the reduced-grid certificate verdict; ``extra`` carries
    the reduced matrix, trace and that report.
    """
    active = list(full_net.active if active is None else active)
    passive = [i for i in range(full_net.n) if i not in active]
    p = _params_for(full_net, params, active)
    Y = build_admittance(full_net)
    V = full_net.voltages
    delta_active = np.asarray(delta_active, dtype=float)
    kron.validate_nu(nu_min, nu_max)

    reasons, warns = [], []
    if passive:
        a1 = kron.check_assumption1(Y)
        if not a1.ok:
            reasons.append("assumption1_violation")
            warns.extend(f"assumption 1: entry ({i},{k}) {f}={v:.4g}" for i, k, f, v in a1.violations)
        a2 = kron.check_assumption2(Y, nu_min, nu_max, include_diagonal=True)
        if not a2.ok:
            reasons.append("assumption2_violation")
            warns.extend(f"assumption 2: entry ({i},{k}) ratio={r:.4g}" for i, k, r in a2.violations)
    Yr, trace = kron.kron_reduce(Y, passive, nu_min, nu_max)
    # kron_reduce keeps surviving ids in ascending order
    order = [trace.kept.index(i) for i in active]
    Yr = Yr[np.ix_(order, order)]
    if passive and not trace.assumptions_hold and "assumption2_violation" not in reasons:
        reasons.append("assumption2_violation")
        bad = [s.node for s in trace.steps if not (s.assumption1 and s.assumption2 is not False)]
        warns.append(f"assumptions fail after eliminating node(s) {bad}")

    Ua = V[active] * np.exp(1j * delta_active)
    U = passive_voltages(Y, active, Ua)
    S = U * np.conj(Y @ U)
    Q = S.imag[active]
    B = np.diag(Y).imag[active]
    lhs = -Q - V[active] ** 2 * B
    certs = _node_certs(active, lhs, damping_budget(p.d, p.m), margin)

    reduced = certify_state(Yr, V[active], delta_active, p.m, p.d, margin, ids=active)
    if not reduced.in_omega:
        reasons.append("omega_violation")
    if "disconnected" in reduced.reasons:
        reasons.append("disconnected")
    if not all(c.satisfied for c in certs):
        reasons.append("index_positive")
    verdict = CERTIFIED if not reasons else UNCERTIFIED
    rep = CertReport(certs, verdict, THM2, reasons, warns, reduced.in_omega, reduced.phi_margin)
    rep.cross_check = reduced.certified
    rep.extra = {"reduced_Y": Yr, "trace": trace, "reduced_report": reduced}
    return rep
