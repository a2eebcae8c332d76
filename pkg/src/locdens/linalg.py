"""Dense symmetric linear algebra and numerical checks of the matrix lemmas."""

from __future__ import annotations

import numpy as np

from .errors import NotPositiveDefinite, SingularUpdate
from .quadrature import QuadRule

PD_RTOL = 1e-12


def symmetrize(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def eigvals_sym(M) -> np.ndarray:
    """Eigenvalues in ascending order."""
    return np.linalg.eigvalsh(symmetrize(M))


def _eigh_pd(M):
    w, V = np.linalg.eigh(symmetrize(M))
    top = max(abs(w[-1]), np.finfo(float).tiny)
    if not np.all(np.isfinite(w)) or w[0] <= PD_RTOL * top:
        raise NotPositiveDefinite(
            f"matrix is not positive definite (smallest eigenvalue {w[0]:.3e}, "
            f"largest {w[-1]:.3e})",
            min_eigenvalue=float(w[0]),
        )
    return w, V


def assert_pd(M) -> None:
    _eigh_pd(M)


def sqrt_pd(M) -> np.ndarray:
    w, V = _eigh_pd(M)
    return symmetrize((V * np.sqrt(w)) @ V.T)


def inv_sqrt_pd(M) -> np.ndarray:
    w, V = _eigh_pd(M)
    return symmetrize((V / np.sqrt(w)) @ V.T)


def inv_pd(M) -> np.ndarray:
    w, V = _eigh_pd(M)
    return symmetrize((V / w) @ V.T)


def solve_pd(M, v) -> np.ndarray:
    _eigh_pd(M)
    L = np.linalg.cholesky(symmetrize(M))
    y = np.linalg.solve(L, v)
    return np.linalg.solve(L.T, y)


def op_norm_sym(M) -> float:
    """Spectral norm of a symmetric matrix."""
    w = eigvals_sym(M)
    return float(max(abs(w[0]), abs(w[-1])))


def eigenvalue_interval_check(A2, B2, lam_ratio_min, lam_ratio_max) -> bool:
    """True iff every eigenvalue of ``B^{-1} A^2 B^{-1}`` lies in the interval.

    Tolerance per eigenvalue is ``1e-8 * (1 + |lambda|)``.
    """
    if not (np.isfinite(lam_ratio_min) and np.isfinite(lam_ratio_max)):
        raise ValueError("ratio bounds must be finite")
    if lam_ratio_min > lam_ratio_max:
        raise ValueError("lam_ratio_min > lam_ratio_max")
    Binv = inv_sqrt_pd(B2)
    lam = eigvals_sym(Binv @ symmetrize(A2) @ Binv)
    tol = 1e-8 * (1.0 + np.abs(lam))
    return bool(np.all(lam >= lam_ratio_min - tol) and np.all(lam <= lam_ratio_max + tol))


def matrix_cauchy_gap(psi, delta, rule: QuadRule) -> float:
    """Smallest eigenvalue of ``int psi psi^T * int delta^2 - (int psi delta)(int psi delta)^T``.

    ``psi`` maps an (N, d) node array to (N, p); ``delta`` maps it to (N,).
    A value >= -1e-10 certifies the matrix Cauchy-Schwarz inequality.
    """
    P = np.asarray(psi(rule.nodes), dtype=float)
    dl = np.asarray(delta(rule.nodes), dtype=float)
    if not (np.all(np.isfinite(P)) and np.all(np.isfinite(dl))):
        from .errors import NonFiniteIntegrand

        raise NonFiniteIntegrand("psi or delta not finite on the nodes")
    w = rule.weights
    M = (P * w[:, None]).T @ P
    D = float(w @ (dl * dl))
    a = P.T @ (w * dl)
    return float(eigvals_sym(M * D - np.outer(a, a))[0])


def sherman_morrison_inv(A, u, lam) -> np.ndarray:
    """Inverse of ``A - lam * u u^T`` from the inverse of ``A``."""
    Ainv = inv_pd(A)
    u = np.asarray(u, dtype=float)
    Au = Ainv @ u
    denom = 1.0 - lam * float(u @ Au)
    if abs(denom) < 1e-12:
        raise SingularUpdate(f"rank-one update is singular (denominator {denom:.3e})")
    return symmetrize(Ainv + lam * np.outer(Au, Au) / denom)
