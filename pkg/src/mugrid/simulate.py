"""Fixed-step RK4 integration of the swing model and of the droop-controlled VSI model."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .netmodel import InterfaceParams, Network, build_admittance
from .powerflow import flow_active

CONVERGED = "converged"
DIVERGED = "diverged"
UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class SwingSystem:
    """m_i dw_i/dt + d_i w_i = P_s,i - P_e,i(delta),  d delta_i/dt = w_i."""

    Y: np.ndarray
    V: np.ndarray
    m: np.ndarray
    d: np.ndarray
    p_set: np.ndarray

    @classmethod
    def from_network(cls, net: Network, params: InterfaceParams, p_set=None) -> "SwingSystem":
        p = params.select(range(net.n))
        return cls(
            build_admittance(net),
            net.voltages,
            p.m,
            p.d,
            p.p_set if p_set is None else np.asarray(p_set, dtype=float),
        )

    @property
    def n(self) -> int:
        return len(self.V)

    def _col(self, x, like):
        return x[:, None] if like.ndim == 2 else x

    def rhs(self, delta, omega):
        pe = flow_active(self.Y, self.V, delta)
        m = self._col(self.m, omega)
        dom = (self._col(self.p_set, omega) - self._col(self.d, omega) * omega - pe) / m
        return omega, dom

    def f(self, x):
        n = self.n
        a, b = self.rhs(x[:n], x[n:])
        return np.concatenate([a, b])


def swing_rhs(delta, omega, net: Network, params: InterfaceParams, p_set=None):
    return SwingSystem.from_network(net, params, p_set).rhs(np.asarray(delta, float), np.asarray(omega, float))


@dataclass(frozen=True)
class VSISystem:
    """d delta/dt = -k (P_m - P_d),  tau dP_m/dt = -P_m + P_e(delta)."""

    Y: np.ndarray
    V: np.ndarray
    k: np.ndarray
    tau: np.ndarray
    p_d: np.ndarray

    @property
    def n(self) -> int:
        return len(self.V)

    def f(self, x):
        n = self.n
        delta, pm = x[:n], x[n:]
        col = (lambda a: a[:, None]) if x.ndim == 2 else (lambda a: a)
        pe = flow_active(self.Y, self.V, delta)
        ddelta = -col(self.k) * (pm - col(self.p_d))
        dpm = (-pm + pe) / col(self.tau)
        return np.concatenate([ddelta, dpm])


def vsi_to_swing(k, tau, p_d):
    """Droop gain and filter constant to swing parameters: m = tau/k, d = 1/k, P_s = P_d."""
    k = np.asarray(k, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if np.any(k <= 0):
        raise ValueError("droop gain k must be positive")
    if np.any(tau < 0):
        raise ValueError("filter time constant tau must be nonnegative")
    if np.any(tau == 0):
        warnings.warn("tau = 0 gives zero virtual inertia", RuntimeWarning, stacklevel=2)
    m = tau / k
    d = 1.0 / k
    p_s = np.asarray(p_d, dtype=float)
    if m.ndim == 0:
        return float(m), float(d), float(p_s)
    return m, d, p_s


@dataclass
class Trajectory:
    t: np.ndarray
    delta: np.ndarray  # (steps, n[, batch])
    omega: np.ndarray
    diverged: bool = False
    divergence_index: int | None = None
    divergence_reason: str | None = None
    dt: float = 0.0

    def to_rows(self):
        """Rows (t, delta_0..delta_{n-1}, omega_0..omega_{n-1}) for the first batch member."""
        d = self.delta if self.delta.ndim == 2 else self.delta[..., 0]
        w = self.omega if self.omega.ndim == 2 else self.omega[..., 0]
        return np.column_stack([self.t, d, w])


def _rk4(f, x0, T, dt, store_every, state_limit, slip_limit, n):
    steps = int(round(T / dt))
    x = np.array(x0, dtype=float)
    nstore = steps // store_every + 1
    out = np.empty((nstore,) + x.shape)
    out[0] = x
    spread0 = np.ptp(x[:n], axis=0)
    div_idx, reason = None, None
    j = 1
    for s in range(1, steps + 1):
        k1 = f(x)
        k2 = f(x + 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2)
        k4 = f(x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if s % store_every == 0:
            out[j] = x
            j += 1
        if not np.all(np.isfinite(x)):
            div_idx, reason = s, "non-finite"
        elif np.max(np.abs(x)) > state_limit:
            div_idx, reason = s, "state-norm"
        elif slip_limit is not None and np.any(np.abs(np.ptp(x[:n], axis=0) - spread0) > slip_limit):
            div_idx, reason = s, "pole-slip"
        if div_idx is not None:
            if s % store_every != 0:
                out[j] = x
                j += 1
            break
    t = np.arange(j) * dt * store_every
    if div_idx is not None:
        t[-1] = div_idx * dt
    return t, out[:j], div_idx, reason


def integrate(
    system,
    delta0,
    omega0,
    T: float,
    dt: float = 1e-3,
    store_every: int = 1,
    state_limit: float = 1e6,
    slip_limit: float | None = 2 * np.pi,
) -> Trajectory:
    """Classic RK4 with a uniform step.

    Divergence is declared when the state leaves ``state_limit`` in max norm,
    becomes non-finite, or the spread of angles (max - min) moves by more than
    ``slip_limit`` from its initial value, i.e. the grid loses synchronism.
    ``delta0``/``omega0`` may carry a trailing batch axis.
    """
    if dt <= 0 or T < dt:
        raise ValueError("need dt > 0 and T >= dt")
    n = system.n
    x0 = np.concatenate([np.asarray(delta0, float), np.asarray(omega0, float)])
    t, X, idx, reason = _rk4(system.f, x0, T, dt, store_every, state_limit, slip_limit, n)
    return Trajectory(t, X[:, :n], X[:, n:], idx is not None, idx, reason, dt)


def integrate_vsi(system: VSISystem, delta0, pm0, T, dt=1e-3, store_every=1):
    """Integrate the VSI model; returns times, angles and measured powers."""
    n = system.n
    x0 = np.concatenate([np.asarray(delta0, float), np.asarray(pm0, float)])
    t, X, _, _ = _rk4(system.f, x0, T, dt, store_every, np.inf, None, n)
    return t, X[:, :n], X[:, n:]


def assess_convergence(traj: Trajectory, tol: float = 1e-3, window: float = 0.1) -> str:
    """Converged iff max |omega| over the trailing ``window`` fraction of the horizon is <= tol."""
    if traj.diverged:
        return DIVERGED
    k = max(1, int(np.ceil(window * len(traj.t))))
    tail = np.abs(traj.omega[-k:])
    return CONVERGED if tail.max() <= tol else UNDETERMINED
