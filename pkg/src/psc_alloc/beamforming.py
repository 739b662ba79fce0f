"""Receive combining (MMSE, ZF), SINR and rate computations for the uplink.

Conventions: ``H`` is ``M x N`` with column ``n`` the channel of user ``n``;
``W`` is ``M x N`` with column ``n`` the combiner of user ``n``; powers are
linear watts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SingularMatrixError(np.linalg.LinAlgError):
    pass


class UndefinedSINRError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EffectiveGains:
    U: np.ndarray  # U[n, k] = |w_n^H h_k|^2
    v: np.ndarray  # v[n] = ||w_n||^2 sigma^2

    def sinr(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        desired = np.diag(self.U) * p
        interference = self.U @ p - desired
        return _ratio(desired, interference + self.v, p)


def _ratio(desired, denom, p):
    out = np.zeros_like(desired)
    active = p > 0
    if np.any(active & (denom <= 0)):
        bad = np.flatnonzero(active & (denom <= 0))
        raise UndefinedSINRError(f"zero combiner for active users {bad.tolist()}")
    out[active] = desired[active] / denom[active]
    return out


def mmse_matrix(H: np.ndarray, p: np.ndarray, noise: float) -> np.ndarray:
    """W = (H P H^H + sigma^2 I)^-1 H P, via a linear solve."""
    H = np.asarray(H, dtype=complex)
    p = np.asarray(p, dtype=float)
    HP = H * p[None, :]
    R = HP @ H.conj().T + noise * np.eye(H.shape[0])
    # LU does not reliably flag rank deficiency; only possible without noise
    if noise <= 0 and np.linalg.matrix_rank(R) < R.shape[0]:
        raise SingularMatrixError("H P H^H is singular and there is no noise term")
    try:
        return np.linalg.solve(R, HP)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("H P H^H + sigma^2 I is singular") from exc


def zf_matrix(H: np.ndarray) -> np.ndarray:
    """W = H (H^H H)^-1, so that W^H H = I."""
    H = np.asarray(H, dtype=complex)
    G = H.conj().T @ H
    if np.linalg.matrix_rank(G) < H.shape[1]:
        raise SingularMatrixError("H does not have full column rank")
    return np.linalg.solve(G, H.conj().T).conj().T


def effective_gains(W: np.ndarray, H: np.ndarray, noise: float) -> EffectiveGains:
    C = W.conj().T @ H  # C[n, k] = w_n^H h_k
    U = np.abs(C) ** 2
    v = np.sum(np.abs(W) ** 2, axis=0) * noise
    return EffectiveGains(U, v)


def sinr(W: np.ndarray, H: np.ndarray, p: np.ndarray, noise: float) -> np.ndarray:
    # Zero-power users get SINR 0 rather than an error: under MMSE their
    # combiner is exactly zero.
    return effective_gains(W, H, noise).sinr(p)


def achievable_rate(gamma: np.ndarray) -> np.ndarray:
    return np.log2(1.0 + np.asarray(gamma, dtype=float))


def equivalent_rate(C: np.ndarray, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise ValueError("compression ratio must be positive")
    return np.asarray(C, dtype=float) / rho


def mmse_orthogonality_residual(W, H, p, noise) -> float:
    """Frobenius norm of W^H (H P H^H + sigma^2 I) - P H^H.

    Zero exactly when the error is uncorrelated with the raw received
    signal, i.e. when W is the MMSE combiner.
    """
    H = np.asarray(H, dtype=complex)
    p = np.asarray(p, dtype=float)
    PHh = p[:, None] * H.conj().T
    R = (H * p[None, :]) @ H.conj().T + noise * np.eye(H.shape[0])
    return float(np.linalg.norm(W.conj().T @ R - PHh))
