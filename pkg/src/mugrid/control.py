"""Distributed interface retuning and greedy coordinated line switching."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .certificates import CertReport, certify_lossy
from .netmodel import OPEN, InterfaceParams, Network, build_admittance, is_connected, set_line_status
from .powerflow import ConvergenceError, Equilibrium, solve_equilibrium

log = logging.getLogger(__name__)

DEFAULT_MARGIN = 0.01


@dataclass(frozen=True)
class TuneBounds:
    d_min: np.ndarray
    d_max: np.ndarray
    m_min: np.ndarray
    m_max: np.ndarray
    margin: float = DEFAULT_MARGIN

    def __post_init__(self):
        arrs = [np.atleast_1d(np.asarray(getattr(self, k), dtype=float)) for k in ("d_min", "d_max", "m_min", "m_max")]
        n = max(a.size for a in arrs)
        arrs = [np.broadcast_to(a, (n,)).copy() for a in arrs]
        for k, a in zip(("d_min", "d_max", "m_min", "m_max"), arrs):
            object.__setattr__(self, k, a)
        if np.any(arrs[0] <= 0) or np.any(arrs[2] <= 0):
            raise ValueError("bounds must be positive")
        if np.any(arrs[0] > arrs[1]) or np.any(arrs[2] > arrs[3]):
            raise ValueError("need d_min <= d_max and m_min <= m_max")
        if self.margin < 0:
            raise ValueError("margin must be nonnegative")

    @classmethod
    def wide(cls, n: int, margin: float = DEFAULT_MARGIN) -> "TuneBounds":
        return cls(np.full(n, 1e-3), np.full(n, 1e3), np.full(n, 1e-3), np.full(n, 1e3), margin)

    def node(self, i: int) -> tuple[float, float, float, float]:
        return float(self.d_min[i]), float(self.d_max[i]), float(self.m_min[i]), float(self.m_max[i])


@dataclass(frozen=True)
class NodeTuning:
    d: float
    m: float
    changed: bool
    feasible: bool


def tune_node(lhs: float, d: float, m: float, d_max: float, m_min: float,
              margin: float = DEFAULT_MARGIN, prefer: str = "damping") -> NodeTuning:
    """Smallest change of (d, m) giving d^2 / (2 m) >= lhs + margin.

    Uses only this node's own measurement-derived lhs (-Q_i - V_i^2 B_ii) and
    its own parameters. Damping is raised first (up to ``d_max``), then inertia
    lowered (down to ``m_min``); ``prefer="inertia"`` swaps the order.
    """
    target = lhs + margin
    if d * d / (2 * m) >= target:
        return NodeTuning(d, m, False, True)
    if prefer == "damping":
        d_new = np.sqrt(2 * m * target)
        if d_new <= d_max:
            return NodeTuning(float(d_new), m, True, True)
        d_new = max(d, d_max)
        m_new = d_new * d_new / (2 * target)
        if m_new >= m_min:
            return NodeTuning(float(d_new), float(m_new), True, True)
        return NodeTuning(float(d_new), float(min(m, m_min)), True, False)
    if prefer == "inertia":
        m_new = d * d / (2 * target)
        if m_new >= m_min:
            return NodeTuning(d, float(m_new), True, True)
        m_new = min(m, m_min)
        d_new = np.sqrt(2 * m_new * target)
        if d_new <= d_max:
            return NodeTuning(float(d_new), float(m_new), True, True)
        return NodeTuning(float(max(d, d_max)), float(m_new), True, False)
    raise ValueError(f"unknown preference {prefer!r}")


@dataclass
class ControlPlan:
    d: np.ndarray
    m: np.ndarray
    changed: list = field(default_factory=list)
    infeasible: list = field(default_factory=list)
    lines_opened: list = field(default_factory=list)
    report: CertReport | None = None
    equilibrium: Equilibrium | None = None
    network: Network | None = None
    log: list = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        if self.infeasible:
            return False
        return self.report is None or self.report.certified

    def to_dict(self, ids=None) -> dict:
        ids = list(range(len(self.d))) if ids is None else list(ids)
        out = {
            "feasible": bool(self.feasible),
            "params": [{"id": int(i), "d": float(d), "m": float(m)} for i, d, m in zip(ids, self.d, self.m)],
            "changed": [int(i) for i in self.changed],
            "infeasible": [int(i) for i in self.infeasible],
            "lines_opened": [[int(i), int(k)] for i, k in self.lines_opened],
            "log": list(self.log),
        }
        if self.report is not None:
            out["report"] = self.report.to_dict()
        if self.equilibrium is not None:
            out["equilibrium"] = self.equilibrium.to_dict()
        return out


def tune_distributed(lhs, d, m, bounds: TuneBounds, prefer: str = "damping") -> ControlPlan:
    """Apply :func:`tune_node` independently at every node."""
    lhs = np.asarray(lhs, dtype=float)
    d = np.asarray(d, dtype=float)
    m = np.asarray(m, dtype=float)
    d_new, m_new = d.copy(), m.copy()
    changed, infeasible = [], []
    for i in range(len(lhs)):
        _, d_max, m_min, _ = bounds.node(i)
        t = tune_node(float(lhs[i]), float(d[i]), float(m[i]), d_max, m_min, bounds.margin, prefer)
        d_new[i], m_new[i] = t.d, t.m
        if t.changed:
            changed.append(i)
        if not t.feasible:
            infeasible.append(i)
    return ControlPlan(d_new, m_new, changed, infeasible)


def stabilize(net: Network, equilibrium, params: InterfaceParams, bounds: TuneBounds,
              prefer: str = "damping") -> ControlPlan:
    """Retune every node from its local lhs and re-certify at the same equilibrium."""
    p = params.select(range(net.n))
    before = certify_lossy(net, equilibrium, p)
    plan = tune_distributed(before.lhs, p.d, p.m, bounds, prefer)
    plan.report = certify_lossy(net, equilibrium, p.with_values(m=plan.m, d=plan.d))
    plan.equilibrium = equilibrium if isinstance(equilibrium, Equilibrium) else None
    return plan


def braess_delta(net: Network, line: tuple[int, int], V=None) -> tuple[float, float]:
    """Drop of sum_k V_i V_k |Y_ik| at both endpoints if ``line`` were opened."""
    i, k = line
    ln = net.lines[net.find_line(i, k)]
    if not ln.closed:
        return 0.0, 0.0
    V = net.voltages if V is None else np.asarray(V, dtype=float)
    delta = float(V[ln.i] * V[ln.k] * abs(ln.y))
    return delta, delta


def _default_solver(p_set, delta0=None):
    """Newton warm-started from the last equilibrium it found."""
    last = {"delta": delta0}

    def solve(net: Network) -> Equilibrium:
        eq = solve_equilibrium(build_admittance(net), net.voltages, p_set, delta0=last["delta"])
        last["delta"] = eq.delta
        return eq

    return solve


def search_line_switching(
    net: Network,
    params: InterfaceParams,
    budget: int,
    equilibrium_solver: Callable[[Network], Equilibrium] | None = None,
    margin: float = 0.0,
    delta0=None,
) -> ControlPlan:
    """Greedy switching: open the line with the largest total relief that keeps
    the grid connected, re-solve the equilibrium, re-certify; repeat until
    certified or ``budget`` lines are open. Ties go to the lowest line index.
    The default solver starts from ``delta0`` and then from the previous
    equilibrium.
    """
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    p = params.select(range(net.n))
    solver = equilibrium_solver or _default_solver(p.p_set, delta0)
    plan = ControlPlan(p.d.copy(), p.m.copy())
    try:
        eq = solver(net)
    except (ConvergenceError, np.linalg.LinAlgError) as exc:
        plan.log.append(f"initial equilibrium failed: {exc}")
        plan.infeasible = list(range(net.n))
        return plan
    plan.equilibrium = eq
    plan.report = certify_lossy(net, eq, p, margin)
    cur = net
    while not plan.report.certified and len(plan.lines_opened) < budget:
        cands = []
        for idx, ln in enumerate(cur.lines):
            if not ln.closed:
                continue
            trial = set_line_status(cur, ln.i, ln.k, OPEN)
            if not is_connected(trial):
                continue
            a, b = braess_delta(cur, (ln.i, ln.k))
            cands.append((-(a + b), idx, trial))
        cands.sort(key=lambda c: (c[0], c[1]))
        progressed = False
        for _, idx, trial in cands:
            ln = cur.lines[idx]
            try:
                eq = solver(trial)
            except (ConvergenceError, np.linalg.LinAlgError) as exc:
                msg = f"opening ({ln.i},{ln.k}) skipped: {exc}"
                log.info(msg)
                plan.log.append(msg)
                continue
            cur = trial
            plan.lines_opened.append((ln.i, ln.k))
            plan.equilibrium = eq
            plan.report = certify_lossy(cur, eq, p, margin)
            plan.log.append(f"opened ({ln.i},{ln.k}); verdict {plan.report.verdict}")
            progressed = True
            break
        if not progressed:
            plan.log.append("no admissible line left to open")
            break
    plan.network = cur
    return plan
