"""Laplacian, system Jacobian, spectra and the structural checks tying them together."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .powerflow import flow_jacobian

RANK_RTOL = 1e-8


class SpectrumError(RuntimeError):
    pass


def build_laplacian(Y, V, delta) -> np.ndarray:
    """Jacobian of the flow function.

    Off-diagonals are minus the arc weights w_ik = V_i V_k |Y_ik| sin(phi_ik);
    rows sum to zero by construction.
    """
    return flow_jacobian(np.asarray(Y, dtype=complex), V, delta)


def arc_weights(L) -> np.ndarray:
    W = -np.array(L, dtype=float)
    np.fill_diagonal(W, 0.0)
    return W


def _positive(name, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    bad = np.flatnonzero(~(x > 0))
    if bad.size:
        raise ValueError(f"{name} must be positive; node {int(bad[0])} has {name}={x[bad[0]]}")
    return x


def _diag_vector(x):
    x = np.asarray(x, dtype=float)
    return np.diag(x).copy() if x.ndim == 2 else np.atleast_1d(x)


def build_jacobian(L, m, d) -> np.ndarray:
    """J = [[0, I], [-M^-1 L, -M^-1 D]] with M, D diagonal."""
    L = np.atleast_2d(np.asarray(L, dtype=float))
    n = L.shape[0]
    m = _positive("m", _diag_vector(m))
    d = _positive("d", _diag_vector(d))
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = np.eye(n)
    J[n:, :n] = -L / m[:, None]
    J[n:, n:] = np.diag(-d / m)
    return J


@dataclass(frozen=True)
class Spectrum:
    values: np.ndarray
    zero_count: int
    lhp: bool
    max_real_nonzero: float
    tol_zero: float

    @property
    def nonzero(self) -> np.ndarray:
        return self.values[np.abs(self.values) > self.tol_zero]

    def to_dict(self) -> dict:
        return {
            "zero_count": int(self.zero_count),
            "lhp": bool(self.lhp),
            "max_real_nonzero": float(self.max_real_nonzero),
            "tol_zero": float(self.tol_zero),
        }


def zero_tolerance(values) -> float:
    rho = float(np.max(np.abs(values))) if len(values) else 0.0
    return 1e-8 * max(1.0, rho)


def classify_spectrum(values, tol_zero: float | None = None) -> Spectrum:
    """Count zero modes and decide whether every nonzero eigenvalue lies in Re < 0."""
    values = np.asarray(values, dtype=complex)
    tol = zero_tolerance(values) if tol_zero is None else tol_zero
    is_zero = np.abs(values) <= tol
    nz = values[~is_zero]
    max_re = float(nz.real.max()) if nz.size else -np.inf
    return Spectrum(values, int(is_zero.sum()), bool(np.all(nz.real < 0)), max_re, tol)


def eigenvalues(J) -> Spectrum:
    J = np.asarray(J, dtype=float)
    if not np.all(np.isfinite(J)):
        raise SpectrumError("Jacobian has non-finite entries")
    try:
        vals = linalg.eigvals(J, check_finite=False)
    except linalg.LinAlgError as exc:
        raise SpectrumError(f"eigensolver failed (cond={np.linalg.cond(J):.3e}): {exc}") from exc
    return classify_spectrum(vals)


def conjugate_mismatch(values) -> float:
    """Largest distance between the spectrum and its mirror image, as a multiple of the spectral radius."""
    values = np.asarray(values, dtype=complex)
    if values.size == 0:
        return 0.0
    mirror = np.conj(values)
    dist = np.abs(values[:, None] - mirror[None, :]).min(axis=1)
    return float(dist.max() / max(1.0, np.abs(values).max()))


def pencil(L, m, d, lam) -> np.ndarray:
    return lam**2 * np.diag(_diag_vector(m)) + lam * np.diag(_diag_vector(d)) + np.asarray(L)


def pencil_residual(L, m, d, lam) -> float:
    """sigma_min(P(lam)) / ||P(lam)||_2 for P(lam) = lam^2 M + lam D + L."""
    s = linalg.svdvals(pencil(L, m, d, complex(lam)))
    if s[0] == 0:
        return 0.0
    return float(s[-1] / s[0])


def null_space(A, rtol: float = RANK_RTOL) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A))
    u, s, vh = linalg.svd(A)
    if s.size == 0 or s[0] == 0:
        return np.eye(A.shape[1])
    rank = int(np.sum(s > rtol * s[0]))
    return vh[rank:].conj().T


@dataclass
class MMatrixReport:
    sign_ok: bool
    sign_violations: list
    max_row_sum: float
    gershgorin_rhp: bool
    strongly_connected: bool
    zero_multiplicity: int
    zero_simple: bool
    nonzero_positive: bool
    eigenvalues: np.ndarray

    @property
    def singular_m_matrix(self) -> bool:
        return self.sign_ok and self.gershgorin_rhp and self.nonzero_positive


def m_matrix_diagnostics(L, tol: float = 1e-12) -> MMatrixReport:
    """Sign pattern, Gershgorin discs and zero-eigenvalue multiplicity of L."""
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    scale = max(1.0, np.abs(L).max()) if L.size else 1.0
    W = arc_weights(L)
    viol = [(int(i), int(k), float(W[i, k])) for i, k in zip(*np.nonzero(W < -tol * scale))]
    row = np.abs(L.sum(axis=1)).max() if n else 0.0
    radius = np.abs(W).sum(axis=1)
    gersh = bool(np.all(np.diag(L) - radius >= -tol * scale))
    ncomp, _ = connected_components(csr_matrix(W > tol * scale), directed=True, connection="strong")
    ev = linalg.eigvals(L) if n else np.zeros(0)
    ztol = 1e-8 * scale
    zmask = np.abs(ev) <= ztol
    return MMatrixReport(
        sign_ok=not viol,
        sign_violations=viol,
        max_row_sum=float(row),
        gershgorin_rhp=gersh,
        strongly_connected=bool(ncomp == 1),
        zero_multiplicity=int(zmask.sum()),
        zero_simple=bool(zmask.sum() == 1),
        nonzero_positive=bool(np.all(ev[~zmask].real > 0)),
        eigenvalues=ev,
    )


@dataclass
class KernelReport:
    dim_ker_J: int
    dim_ker_L: int
    projection_ok: bool
    lift_ok: bool
    J_singular: bool
    L_singular: bool

    @property
    def ok(self) -> bool:
        return (
            self.projection_ok
            and self.lift_ok
            and self.dim_ker_J == self.dim_ker_L
            and self.J_singular == self.L_singular
        )


def kernel_projection_check(J, L, atol: float = 1e-8) -> KernelReport:
    """Null vectors (v1, v2) of J have v2 = 0 and L v1 = 0; each (v, 0) with L v = 0 is in ker J."""
    J = np.asarray(J, dtype=float)
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    NJ = null_space(J)
    NL = null_space(L)
    sJ = max(1.0, np.abs(J).max())
    sL = max(1.0, np.abs(L).max())
    proj_ok = True
    for v in NJ.T:
        v1, v2 = v[:n], v[n:]
        if np.linalg.norm(v2) > atol or np.linalg.norm(L @ v1) > atol * sL:
            proj_ok = False
    lift_ok = True
    for v in NL.T:
        lifted = np.concatenate([v, np.zeros(n)])
        if np.linalg.norm(J @ lifted) > atol * sJ:
            lift_ok = False
    # projection of ker J must span ker L: compare ranks
    if NJ.shape[1]:
        P = NJ[:n]
        proj_rank = int(np.linalg.matrix_rank(P, tol=atol))
        proj_ok = proj_ok and proj_rank == NL.shape[1]
    return KernelReport(
        dim_ker_J=NJ.shape[1],
        dim_ker_L=NL.shape[1],
        projection_ok=proj_ok,
        lift_ok=lift_ok,
        J_singular=NJ.shape[1] > 0,
        L_singular=NL.shape[1] > 0,
    )
