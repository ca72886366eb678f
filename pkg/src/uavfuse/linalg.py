"""Small dense helpers for covariance matrices with badly mixed units.

Channel covariances mix delays (~1e-21 s^2) with cosines (~1e-6), so every
factorization and inversion here works on the diagonally equilibrated
(correlation-form) matrix and scales back afterwards.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalError


def symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def _equilibrate(M: np.ndarray):
    d = np.sqrt(np.clip(np.diag(M), 0.0, None))
    active = d > 0
    inv = np.zeros_like(d)
    inv[active] = 1.0 / d[active]
    return d, inv, active


def psd_sqrt(M: np.ndarray, neg_tol: float = 1e-12) -> np.ndarray:
    """Factor L with L @ L.T == M for a PSD, possibly rank-deficient, matrix.

    Eigenvalues of the equilibrated matrix down to ``-neg_tol`` are clamped to
    zero; anything more negative raises NumericalError with the spectrum.
    """
    M = symmetrize(np.asarray(M, dtype=float))
    if np.any(np.diag(M) < 0):
        raise NumericalError(f"negative variance on the diagonal: {np.diag(M)}")
    d, inv, active = _equilibrate(M)
    L = np.zeros_like(M)
    if not np.any(active):
        return L
    C = M[np.ix_(active, active)] * np.outer(inv[active], inv[active])
    w, V = np.linalg.eigh(C)
    if w.min() < -neg_tol:
        raise NumericalError(f"matrix is not PSD: equilibrated eigenvalues {w}")
    L[np.ix_(active, active)] = d[active, None] * (V * np.sqrt(np.clip(w, 0.0, None)))
    return L


def scaled_condition(M: np.ndarray) -> float:
    """2-norm condition number of the equilibrated matrix; inf if any variance is zero."""
    d, inv, active = _equilibrate(M)
    if not np.all(active):
        return np.inf
    return float(np.linalg.cond(M * np.outer(inv, inv)))


def spd_solve(S: np.ndarray, B: np.ndarray, max_cond: float = 1e12) -> np.ndarray:
    """Solve S X = B for symmetric positive-definite S, with a scaled condition guard."""
    S = symmetrize(S)
    d, inv, active = _equilibrate(S)
    if not np.all(active):
        raise NumericalError(f"matrix has zero variance at indices {np.flatnonzero(~active)}")
    C = S * np.outer(inv, inv)
    cond = np.linalg.cond(C)
    if not np.isfinite(cond) or cond > max_cond:
        raise NumericalError(f"matrix is ill-conditioned (scaled condition {cond:.3e} > {max_cond:.1e})")
    Y = np.linalg.solve(C, inv[:, None] * B if B.ndim == 2 else inv * B)
    return inv[:, None] * Y if B.ndim == 2 else inv * Y


def spd_inverse(S: np.ndarray, max_cond: float = 1e12) -> np.ndarray:
    return symmetrize(spd_solve(S, np.eye(S.shape[0]), max_cond))


def clamp_psd(P: np.ndarray, fail_below: float = -1e-6) -> np.ndarray:
    """Symmetrize and zero tiny negative eigenvalues (judged in equilibrated form)."""
    P = symmetrize(P)
    d, inv, active = _equilibrate(P)
    if np.any(np.diag(P) < 0):
        raise NumericalError(f"negative variance on the diagonal: {np.diag(P)}")
    idx = np.ix_(active, active)
    C = P[idx] * np.outer(inv[active], inv[active])
    w, V = np.linalg.eigh(C)
    if w.size == 0 or w.min() >= 0:
        return P
    if w.min() < fail_below:
        raise NumericalError(f"covariance lost positive semi-definiteness: min eigenvalue {w.min():.3e}")
    out = np.zeros_like(P)
    out[idx] = symmetrize((V * np.clip(w, 0.0, None)) @ V.T) * np.outer(d[active], d[active])
    return out
