"""Kron reduction of passive nodes and the admittance sign/ratio assumptions it relies on."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PIVOT_RTOL = 1e-12


class KronError(ValueError):
    pass


def nu_max_bound(nu_min: float) -> float:
    """Largest admissible upper ratio bound, sqrt(1 + 2 nu_min^2)."""
    return float(np.sqrt(1.0 + 2.0 * nu_min**2))


def validate_nu(nu_min: float, nu_max: float) -> None:
    if not (0 <= nu_min <= nu_max):
        raise KronError(f"need 0 <= nu_min <= nu_max, got ({nu_min}, {nu_max})")
    if nu_max > nu_max_bound(nu_min):
        raise KronError(
            f"nu_max={nu_max} exceeds sqrt(1 + 2 nu_min^2) = {nu_max_bound(nu_min):.6g}"
        )


def eliminate_node(Y, k0: int) -> np.ndarray:
    """Y^r_ik = Y_ik - Y_ik0 Y_k0k / Y_k0k0 for i, k != k0."""
    Y = np.asarray(Y, dtype=complex)
    piv = Y[k0, k0]
    if abs(piv) <= PIVOT_RTOL * np.abs(Y).max():
        raise KronError(f"singular pivot at node {k0} (|Y_kk| = {abs(piv):.3e})")
    keep = np.r_[0:k0, k0 + 1 : Y.shape[0]]
    col = Y[keep, k0]
    row = Y[k0, keep]
    return Y[np.ix_(keep, keep)] - np.outer(col, row) / piv


def schur_reduce(Y, passive) -> np.ndarray:
    """One-shot Y[a,a] - Y[a,b] Y[b,b]^-1 Y[b,a]."""
    Y = np.asarray(Y, dtype=complex)
    passive = sorted(set(int(p) for p in passive))
    active = [i for i in range(Y.shape[0]) if i not in passive]
    if not passive:
        return Y.copy()
    Yaa = Y[np.ix_(active, active)]
    Yab = Y[np.ix_(active, passive)]
    Yba = Y[np.ix_(passive, active)]
    Ybb = Y[np.ix_(passive, passive)]
    return Yaa - Yab @ np.linalg.solve(Ybb, Yba)


@dataclass
class AssumptionReport:
    ok: bool
    violations: list = field(default_factory=list)
    ratios: dict = field(default_factory=dict)


def _tol(Y, rtol):
    return rtol * max(np.abs(Y).max(), 1e-300) if np.size(Y) else 0.0


def check_assumption1(Y, rtol: float = 1e-12) -> AssumptionReport:
    """Off-diagonals G_ik <= 0, B_ik >= 0; diagonals G_ii >= 0, B_ii <= 0."""
    Y = np.asarray(Y, dtype=complex)
    tol = _tol(Y, rtol)
    n = Y.shape[0]
    G, B = Y.real, Y.imag
    viol = []
    for i in range(n):
        for k in range(n):
            if i == k:
                if G[i, i] < -tol:
                    viol.append((i, i, "G", float(G[i, i])))
                if B[i, i] > tol:
                    viol.append((i, i, "B", float(B[i, i])))
            else:
                if G[i, k] > tol:
                    viol.append((i, k, "G", float(G[i, k])))
                if B[i, k] < -tol:
                    viol.append((i, k, "B", float(B[i, k])))
    return AssumptionReport(not viol, viol)


def check_assumption2(Y, nu_min: float, nu_max: float, include_diagonal: bool = False,
                      rtol: float = 1e-12) -> AssumptionReport:
    """nu_min |G_ik| <= |B_ik| <= nu_max |G_ik| for every line; G_ik = 0 forces B_ik = 0.

    ``include_diagonal`` additionally applies the lower bound to self-admittances,
    which the sign-preservation argument uses for the eliminated pivot.
    """
    validate_nu(nu_min, nu_max)
    Y = np.asarray(Y, dtype=complex)
    tol = _tol(Y, rtol)
    n = Y.shape[0]
    viol, ratios = [], {}
    for i in range(n):
        for k in range(i + 1, n):
            g, b = abs(Y[i, k].real), abs(Y[i, k].imag)
            if g <= tol and b <= tol:
                continue
            if g <= tol:
                viol.append((i, k, np.inf))
                ratios[(i, k)] = np.inf
                continue
            r = b / g
            ratios[(i, k)] = r
            if r < nu_min * (1 - 1e-12) or r > nu_max * (1 + 1e-12):
                viol.append((i, k, r))
    if include_diagonal:
        for i in range(n):
            g, b = abs(Y[i, i].real), abs(Y[i, i].imag)
            if g <= tol:
                continue
            r = b / g
            ratios[(i, i)] = r
            if r < nu_min * (1 - 1e-12):
                viol.append((i, i, r))
    return AssumptionReport(not viol, viol, ratios)


@dataclass
class ReductionStep:
    node: int  # original id of the eliminated node
    assumption1: bool
    assumption2: bool | None
    b_before: np.ndarray  # diagonal susceptances of surviving nodes before the step
    b_after: np.ndarray
    monotone: bool


@dataclass
class ReductionTrace:
    eliminated: list = field(default_factory=list)
    kept: list = field(default_factory=list)
    steps: list = field(default_factory=list)

    @property
    def assumptions_hold(self) -> bool:
        return all(s.assumption1 and s.assumption2 is not False for s in self.steps)

    @property
    def monotone(self) -> bool:
        return all(s.monotone for s in self.steps)

    def to_dict(self) -> dict:
        return {
            "eliminated": [int(i) for i in self.eliminated],
            "kept": [int(i) for i in self.kept],
            "steps": [
                {
                    "node": int(s.node),
                    "assumption1": bool(s.assumption1),
                    "assumption2": None if s.assumption2 is None else bool(s.assumption2),
                    "monotone": bool(s.monotone),
                    "b_before": [float(x) for x in s.b_before],
                    "b_after": [float(x) for x in s.b_after],
                }
                for s in self.steps
            ],
        }


@dataclass
class MonotonicityReport:
    diff: np.ndarray  # B^r_kk - B_kk for surviving nodes
    ok: bool


def verify_monotonicity(Y, Y_reduced, eliminated: int, atol: float = 1e-12) -> MonotonicityReport:
    Y = np.asarray(Y, dtype=complex)
    keep = [i for i in range(Y.shape[0]) if i != eliminated]
    diff = np.diag(np.asarray(Y_reduced)).imag - np.diag(Y)[keep].imag
    return MonotonicityReport(diff, bool(np.all(diff >= -atol)))


def kron_reduce(Y, passive, nu_min: float | None = None, nu_max: float | None = None,
                order: str = "descending"):
    """Eliminate ``passive`` one node at a time; highest index first by default.

    Returns the reduced matrix (rows ordered as the surviving original ids)
    and a trace with per-step assumption and monotonicity diagnostics. When
    ``nu_min``/``nu_max`` are given, the ratio assumption is checked on every
    intermediate matrix including the input.
    """
    Y = np.asarray(Y, dtype=complex)
    passive = sorted(set(int(p) for p in passive), reverse=(order == "descending"))
    ids = list(range(Y.shape[0]))
    if len(passive) >= len(ids):
        raise KronError("active set must be nonempty")
    check2 = nu_min is not None and nu_max is not None
    trace = ReductionTrace()
    cur = Y.copy()
    for node in passive:
        pos = ids.index(node)
        a1 = check_assumption1(cur).ok
        a2 = check_assumption2(cur, nu_min, nu_max, include_diagonal=True).ok if check2 else None
        try:
            nxt = eliminate_node(cur, pos)
        except KronError as exc:
            raise KronError(f"step {len(trace.steps) + 1}: {exc} (original node {node})") from exc
        mono = verify_monotonicity(cur, nxt, pos)
        b_before = np.diag(cur).imag[[i for i in range(len(ids)) if i != pos]]
        ids.pop(pos)
        cur = nxt
        trace.steps.append(ReductionStep(node, a1, a2, b_before, np.diag(cur).imag.copy(), mono.ok))
        trace.eliminated.append(node)
    if check2 and trace.steps:
        # the fully reduced matrix must satisfy the ratio bounds too
        last = trace.steps[-1]
        last.assumption2 = last.assumption2 and check_assumption2(cur, nu_min, nu_max, include_diagonal=True).ok
    trace.kept = ids
    return cur, trace
