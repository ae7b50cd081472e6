"""Receive filters and channel estimators.

Least-squares filters are computed from training blocks alone; MMSE filters
need composite channels (true or estimated). The correlation-based channel
estimator reuses the canonical-set reconstruction of `codebook`.
"""

from dataclasses import dataclass

import numpy as np

from .codebook import reconstruct_canonical

__all__ = [
    "FilterBank",
    "CsiEstimate",
    "ls_filter",
    "ls_filters",
    "proj_stat",
    "noise_quadratic",
    "mmse_filter",
    "mmse_error",
    "estimate_csi",
    "GRAM_COND_LIMIT",
]

# Gram matrices worse conditioned than this are treated as singular
GRAM_COND_LIMIT = 1e12


@dataclass
class FilterBank:
    """Filters of one cell: BTS receive filters ``v`` (K, M) and UE
    precoders/combiners ``g`` (K, N_T), plus the IRS weights ``w``."""

    v: np.ndarray
    g: np.ndarray
    w: np.ndarray


def _gram_ok(y):
    m, t = y.shape
    if t < m:
        return False
    return np.linalg.cond(y @ y.conj().T) < GRAM_COND_LIMIT


def ls_filters(y, b):
    """LS filters for every column of `b` (T, S); returns ((M, S), used_pinv).

    Solves ``min ||b_s^H - v_s^H y||`` via the normal equations when the Gram
    matrix ``y y^H`` is invertible, and via the minimum-norm solution
    ``(y^H)^+ b_s`` otherwise.
    """
    y = np.asarray(y)
    b = np.asarray(b)
    if _gram_ok(y):
        return np.linalg.solve(y @ y.conj().T, y @ b), False
    return np.linalg.lstsq(y.conj().T, b, rcond=None)[0], True


def ls_filter(y, b, full_output=False):
    """LS receive filter ``v = (y y^H)^{-1} y b`` for one pilot `b` (T,).

    With ``full_output=True`` also return whether the pseudo-inverse
    fallback was taken.
    """
    b = np.asarray(b)
    if b.shape != (np.shape(y)[1],):
        raise ValueError(f"pilot length {b.shape} does not match block {np.shape(y)}")
    v, used_pinv = ls_filters(y, b[:, None])
    if full_output:
        return v[:, 0], used_pinv
    return v[:, 0]


def proj_stat(y, b_k, b_m):
    """``b_k^H P b_m`` with P the orthogonal projector onto the column space
    of ``y^H``."""
    v_m = ls_filter(y, b_m)
    return np.vdot(np.asarray(y) @ np.asarray(b_k), v_m)


def noise_quadratic(y, b_k):
    """``||(y^H)^+ b_k||^2``; equals ``||ls_filter(y, b_k)||^2``."""
    v = ls_filter(y, b_k)
    return float(np.real(np.vdot(v, v)))


def mmse_filter(composites, powers, noise_var, k):
    """MMSE receive filter of user `k`.

    ``v_k = (sum_m s_m^2 h_m h_m^H + noise_var I)^{-1} h_k s_k^2`` with
    `composites` of shape (U, M) (effective SIMO channels).
    """
    h = np.asarray(composites)
    p = np.asarray(powers, dtype=float)
    cov = (h.T * p) @ h.conj() + noise_var * np.eye(h.shape[1])
    return np.linalg.solve(cov, h[k] * p[k])


def mmse_error(composites, powers, noise_var, k):
    """Normalized MMSE of user `k`: ``1 - s_k^2 h_k^H R^{-1} h_k``."""
    h = np.asarray(composites)
    p = np.asarray(powers, dtype=float)
    cov = (h.T * p) @ h.conj() + noise_var * np.eye(h.shape[1])
    x = np.linalg.solve(cov, h[k])
    return float(1.0 - p[k] * np.real(np.vdot(h[k], x)))


@dataclass(frozen=True)
class CsiEstimate:
    """Affine channel model ``H_s(w) = direct[s] + sum_j w_j cascade[s, j]``.

    Attributes
    ----------
    users : ndarray, shape (S,)
        Network-wide indices of the users in scope.
    direct : ndarray, shape (S, M, N_T)
    cascade : ndarray, shape (S, N, M, N_T)
    scope : str
        ``'intra_only'``, ``'all_users'`` or ``'true'``.
    """

    users: np.ndarray
    direct: np.ndarray
    cascade: np.ndarray
    scope: str

    def composite(self, w):
        return self.direct + np.einsum("snmt,n->smt", self.cascade, np.asarray(w))

    def effective(self, precoders):
        """SIMO view for precoders (S, N_T): direct (S, M), cascade (S, M, N)."""
        g = np.asarray(precoders)
        d = np.einsum("smt,st->sm", self.direct, g)
        c = np.einsum("snmt,st->smn", self.cascade, g)
        return d, c

    def take(self, idx):
        idx = np.asarray(idx)
        return CsiEstimate(self.users[idx], self.direct[idx], self.cascade[idx], self.scope)

    @classmethod
    def from_realization(cls, real, cell, users):
        users = np.asarray(users)
        h_ir = real.bts_to_irs[cell]
        cascade = np.einsum("nm,unt->unmt", h_ir, real.ue_to_irs[cell, users])
        return cls(users, real.direct[cell, users].copy(), cascade, "true")


def estimate_csi(record, cb, pilots, users, joint_ls=False, scope="all_users"):
    """Estimate direct and per-element channels of `users` at one BTS.

    Parameters
    ----------
    record : TrainingRecord
        Codebook sweep received by the BTS.
    cb : Codebook
    pilots : ndarray, shape (S, T) or (S, N_T, T)
        Amplitude-scaled pilots of the users in scope, and only those.
    users : array_like of int, shape (S,)
    joint_ls : bool
        Jointly solve for all in-scope sequences instead of correlating each
        one separately.

    Notes
    -----
    The correlation estimate ``y b_s / ||b_s||^2`` is unbiased for mutually
    uncorrelated pilots; out-of-scope users leak into it when pilots are not
    orthogonal.
    """
    users = np.asarray(users)
    b = np.asarray(pilots)
    if b.shape[0] != users.size:
        raise ValueError("one pilot (set) per in-scope user is required")
    n_streams = 1 if b.ndim == 2 else b.shape[1]
    flat = b.reshape(-1, b.shape[-1])  # (Q, T)

    y0, y_can = reconstruct_canonical(record.epochs, cb)
    z = np.concatenate([y0[None], y_can])  # (N+1, M, T)
    n1, m, t = z.shape
    if joint_ls:
        # z[p] ~ H[p] conj(flat)
        rhs = z.transpose(2, 0, 1).reshape(t, n1 * m)
        est = np.linalg.lstsq(flat.conj().T, rhs, rcond=None)[0]  # (Q, N1*M)
        est = est.reshape(-1, n1, m).transpose(1, 2, 0)
    else:
        energy = np.sum(np.abs(flat) ** 2, axis=1)
        est = np.einsum("pmt,qt->pmq", z, flat) / energy
    est = est.reshape(n1, m, users.size, n_streams).transpose(2, 0, 1, 3)  # (S, N+1, M, NT)
    direct = est[:, 0]
    cascade = est[:, 1:] - direct[:, None]
    return CsiEstimate(users, direct, cascade, scope)
