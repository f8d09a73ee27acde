"""Flow function, reactive power, angle-only Newton solver and the coupling-angle region check."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


MAX_HALVINGS = 12


class ConvergenceError(RuntimeError):
    def __init__(self, msg, residual=np.nan, iterations=0):
        super().__init__(msg)
        self.residual = residual
        self.iterations = iterations


def _phasors(V, delta):
    V = np.asarray(V, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if delta.ndim == 2:
        V = V[:, None]
    return V * np.exp(1j * delta)


def complex_power(Y, V, delta) -> np.ndarray:
    """Outgoing complex power S = U * conj(Y U) with U = V exp(j delta).

    ``delta`` may carry a trailing batch axis.
    """
    U = _phasors(V, delta)
    return U * np.conj(Y @ U)


def flow_active(Y, V, delta) -> np.ndarray:
    """P_e,i = sum_k V_i V_k |Y_ik| cos(theta_ik - delta_i + delta_k)."""
    return complex_power(Y, V, delta).real


def flow_reactive(Y, V, delta) -> np.ndarray:
    """Outgoing reactive power Q_k = -sum_i V_k V_i |Y_ki| sin(theta_ki - delta_k + delta_i)."""
    return complex_power(Y, V, delta).imag


def flow_jacobian(Y, V, delta) -> np.ndarray:
    """d P_e / d delta; identical to the Laplacian of the weighted coupling digraph."""
    U = _phasors(V, delta)
    W = (np.conj(U)[:, None] * Y * U[None, :]).imag
    np.fill_diagonal(W, 0.0)
    return np.diag(W.sum(axis=1)) - W


@dataclass(frozen=True)
class Equilibrium:
    delta: np.ndarray
    omega: np.ndarray
    residual: float
    ref: int = 0
    slack: float = 0.0
    iterations: int = 0

    def to_dict(self) -> dict:
        return {
            "delta": [float(x) for x in self.delta],
            "residual": float(self.residual),
            "ref": int(self.ref),
            "slack": float(self.slack),
            "iterations": int(self.iterations),
        }

    @classmethod
    def from_angles(cls, delta, residual=0.0, ref=0) -> "Equilibrium":
        delta = np.asarray(delta, dtype=float)
        return cls(delta, np.zeros_like(delta), float(residual), ref)


def solve_equilibrium(
    Y,
    V,
    p_set,
    ref: int = 0,
    tol: float = 1e-10,
    max_iter: int = 50,
    delta0=None,
) -> Equilibrium:
    """Newton-Raphson on the angles with fixed voltage magnitudes.

    The reference angle is pinned to zero and the reference node absorbs
    the loss mismatch; ``slack`` reports P_e[ref] - p_set[ref]. Steps are
    halved while they fail to reduce the mismatch norm. Starts flat unless
    ``delta0`` is given.
    """
    Y = np.asarray(Y, dtype=complex)
    V = np.asarray(V, dtype=float)
    p_set = np.asarray(p_set, dtype=float)
    n = len(V)
    keep = np.array([i for i in range(n) if i != ref], dtype=int)
    delta = np.zeros(n) if delta0 is None else np.array(delta0, dtype=float)
    delta = delta - delta[ref]

    def mismatch(d):
        return flow_active(Y, V, d)[keep] - p_set[keep]

    if n == 1:
        res = 0.0
        return Equilibrium(delta, np.zeros(1), res, ref, float(flow_active(Y, V, delta)[0] - p_set[0]), 0)

    F = mismatch(delta)
    res = float(np.max(np.abs(F)))
    it = 0
    while res > tol:
        if it >= max_iter:
            raise ConvergenceError(
                f"Newton did not converge in {max_iter} iterations (residual {res:.3e})", res, it
            )
        Jr = flow_jacobian(Y, V, delta)[np.ix_(keep, keep)]
        cond = np.linalg.cond(Jr)
        if not np.isfinite(cond) or cond > 1e14:
            raise ConvergenceError(
                f"degenerate reduced Jacobian (cond {cond:.3e}) at iteration {it}", res, it
            )
        step = np.linalg.solve(Jr, F)
        # backtrack on the mismatch norm; full steps are kept whenever they help
        t = 1.0
        for _ in range(MAX_HALVINGS):
            trial = delta.copy()
            trial[keep] -= t * step
            F_new = mismatch(trial)
            if np.linalg.norm(F_new) < np.linalg.norm(F):
                break
            t *= 0.5
        delta, F = trial, F_new
        res = float(np.max(np.abs(F)))
        it += 1
        if not np.isfinite(res):
            raise ConvergenceError(f"Newton iterate became non-finite at iteration {it}", res, it)
    Jr = flow_jacobian(Y, V, delta)[np.ix_(keep, keep)]
    cond = np.linalg.cond(Jr)
    if not np.isfinite(cond) or cond > 1e14:
        raise ConvergenceError(f"degenerate reduced Jacobian at the solution (cond {cond:.3e})", res, it)
    slack = float(flow_active(Y, V, delta)[ref] - p_set[ref])
    return Equilibrium(delta, np.zeros(n), res, ref, slack, it)


@dataclass(frozen=True)
class OmegaCheck:
    arcs: np.ndarray  # (n_arcs, 2) ordered pairs (i, k)
    phi: np.ndarray  # theta_ik - delta_i + delta_k per arc
    in_region: bool
    worst_margin: float

    def to_dict(self) -> dict:
        return {"in_omega": bool(self.in_region), "phi_margin": float(self.worst_margin)}


def coupling_angles(Y, delta, tol: float = 0.0):
    Y = np.asarray(Y, dtype=complex)
    delta = np.asarray(delta, dtype=float)
    mask = np.abs(Y) > tol
    np.fill_diagonal(mask, False)
    i, k = np.nonzero(mask)
    phi = np.angle(Y[i, k]) - delta[i] + delta[k]
    return np.column_stack([i, k]), phi


def check_omega_region(Y, delta) -> OmegaCheck:
    """Every arc with nonzero admittance must satisfy 0 < phi_ik < pi."""
    arcs, phi = coupling_angles(Y, delta)
    if len(phi) == 0:
        return OmegaCheck(arcs, phi, True, np.inf)
    margin = np.minimum(phi, np.pi - phi)
    worst = float(margin.min())
    return OmegaCheck(arcs, phi, bool(worst > 0), worst)
